#include <omp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "qtat/errors.hpp"
#include "qtat/io.hpp"
#include "qtat/pipeline.hpp"

using namespace qtat;
using nlohmann::json;

namespace {

Vec3d to_vec3(const std::vector<double>& v) { return Vec3d(v[0], v[1], v[2]); }

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_json_file(const fs::path& file, const json& j) {
  fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os << j.dump(2) << "\n";
}

json meta(const std::string& command) { return json{{"command", command}, {"threads", omp_get_max_threads()}}; }

SolverConfig::Method parse_method(const std::string& s) {
  if (s == "automatic") return SolverConfig::Method::automatic;
  if (s == "krylov") return SolverConfig::Method::krylov;
  if (s == "direct") return SolverConfig::Method::direct;
  throw ConfigError("unknown solver method " + s);
}

// --threads, then QTAT_THREADS, then the OpenMP default.
void configure_threads(int flag) {
  int n = flag;
  if (n <= 0) {
    if (const char* env = std::getenv("QTAT_THREADS")) {
      try {
        n = std::stoi(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("QTAT_THREADS is not an integer: ") + env);
      }
      if (n <= 0) throw ConfigError("QTAT_THREADS must be positive");
    }
  }
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantitative thermo-acoustic tomography toolkit"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  int threads = 0;
  app.add_flag("--version", show_version, "Print the version and the schema revision of every file format");
  app.add_option("--threads", threads, "Worker threads (default: QTAT_THREADS, else hardware parallelism)")
      ->check(CLI::PositiveNumber);

  // forward
  auto* fwd = app.add_subcommand("forward", "Solve the Maxwell boundary value problem and synthesize H");
  std::string f_medium, f_illum, f_out, f_method = "automatic";
  double f_tol = 1e-8;
  fwd->add_option("--medium", f_medium, "Medium directory")->required();
  fwd->add_option("--illum", f_illum, "Illumination directory")->required();
  fwd->add_option("--out", f_out, "Output directory")->required();
  fwd->add_option("--tol", f_tol, "Relative residual tolerance");
  fwd->add_option("--method", f_method, "automatic | krylov | direct");

  // illum
  auto* ill = app.add_subcommand("illum", "Build an illumination set on a medium's grid");
  std::string i_kind = "family", i_medium, i_out;
  int i_count = 4;
  std::vector<std::vector<double>> i_dirs;
  double i_s = 0.0;
  std::vector<double> i_rho, i_rho_perp;
  ill->add_option("--kind", i_kind, "plane | cgo | family")->check(CLI::IsMember({"plane", "cgo", "family"}));
  ill->add_option("--medium", i_medium, "Medium directory (grid and background q0)")->required();
  ill->add_option("--out", i_out, "Output directory")->required();
  ill->add_option("--count", i_count, "family: number of members");
  ill->add_option("--direction", i_dirs, "plane: polarization direction x,y,z (repeatable)")
      ->delimiter(',')
      ->allow_extra_args(false);
  ill->add_option("--s", i_s, "cgo: s");
  ill->add_option("--rho", i_rho, "cgo: rho x,y,z")->delimiter(',')->expected(3);
  ill->add_option("--rho-perp", i_rho_perp, "cgo: rho_perp x,y,z")->delimiter(',')->expected(3);

  // cgo
  auto* cgo = app.add_subcommand("cgo", "Complex geometrical optics solution and remainder decay study");
  std::string c_medium, c_out;
  double c_s = 0.0, c_tol = 1e-10, c_box = 2.0, c_floor = 1e-6;
  std::vector<double> c_rho{0, 0, 1}, c_rho_perp{1, 0, 0}, c_study;
  cgo->add_option("--medium", c_medium, "Medium directory")->required();
  cgo->add_option("--s", c_s, "s (|zeta|^2 = 2 s^2 + k^2)");
  cgo->add_option("--rho", c_rho, "rho x,y,z")->delimiter(',')->expected(3);
  cgo->add_option("--rho-perp", c_rho_perp, "rho_perp x,y,z")->delimiter(',')->expected(3);
  cgo->add_option("--out", c_out, "Output directory")->required();
  cgo->add_option("--study-decay", c_study, "s1,s2,...: write decay.csv")->delimiter(',');
  cgo->add_option("--tol", c_tol, "Series tolerance");
  cgo->add_option("--box-factor", c_box, "Periodic box side over medium box side");
  cgo->add_option("--denom-floor", c_floor, "Resonance floor relative to |zeta|^2");

  // check-symbols
  auto* sym = app.add_subcommand("check-symbols", "Ellipticity scan and Lopatinskii check");
  std::string s_fields, s_medium, s_report;
  int s_xi = 2048, s_min_dist = 0;
  sym->add_option("--fields", s_fields, "Directory with E_<j> fields")->required();
  sym->add_option("--medium", s_medium, "Medium directory")->required();
  sym->add_option("--xi-samples", s_xi, "Fibonacci sphere samples")->check(CLI::PositiveNumber);
  sym->add_option("--min-distance", s_min_dist, "Skip nodes closer than this to the boundary");
  sym->add_option("--report", s_report, "Report JSON path")->required();

  // invert
  auto* inv = app.add_subcommand("invert", "Linearized or Gauss-Newton reconstruction of (sigma, n)");
  std::string v_data, v_init, v_illum, v_out, v_mode = "newton", v_traces, v_truth;
  double v_reg = -1.0, v_inner_tol = 1e-6, v_tol = 1e-8, v_fwd_tol = 1e-10;
  int v_max_iter = 10;
  bool v_freeze_dn = false;
  inv->add_option("--data", v_data, "Directory with H_<j> fields")->required();
  inv->add_option("--init", v_init, "Initial medium directory")->required();
  inv->add_option("--illum", v_illum, "Illumination directory")->required();
  inv->add_option("--mode", v_mode, "linear | newton")->check(CLI::IsMember({"linear", "newton"}));
  inv->add_option("--reg", v_reg, "Tikhonov weight (default 1e-8 |A^t S| / |S|)");
  inv->add_option("--max-iter", v_max_iter, "Gauss-Newton iterations")->check(CLI::PositiveNumber);
  inv->add_option("--out", v_out, "Output directory")->required();
  inv->add_option("--traces", v_traces, "Directory with E_<j> fields imposed on the two boundary layers");
  inv->add_option("--truth", v_truth, "True medium directory, for error metrics");
  inv->add_flag("--freeze-dn", v_freeze_dn, "Hold n fixed");
  inv->add_option("--inner-tol", v_inner_tol, "Normal-equation CG tolerance");
  inv->add_option("--tol", v_tol, "Residual tolerance");
  inv->add_option("--forward-tol", v_fwd_tol, "Forward solver tolerance");

  // pipeline
  auto* pip = app.add_subcommand("pipeline", "Run an experiment config end to end");
  std::string p_config, p_out;
  pip->add_option("--config", p_config, "Experiment JSON")->required();
  pip->add_option("--out", p_out, "Artifact directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  if (show_version) {
    std::cout << version_text();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitConfig;
  }

  try {
    configure_threads(threads);

    if (*fwd) {
      const Medium m = read_medium(f_medium);
      const IlluminationSet il = read_illumination_set(f_illum);
      SolverConfig sc;
      sc.tol = f_tol;
      sc.method = parse_method(f_method);
      std::vector<SolveReport> reports;
      const auto E = solve_forward(m, il.traces, sc, &reports);
      write_vector_fields(f_out, "E", E);
      write_scalar_fields(f_out, "H", m.grid, internal_data(m.sigma, E).H);
      json mt = meta("forward");
      mt["tol"] = f_tol;
      mt["solves"] = json::array();
      for (const auto& r : reports)
        mt["solves"].push_back(
            {{"iterations", r.iterations}, {"relative_residual", r.relative_residual}, {"direct", r.direct}});
      write_manifest(f_out, mt);
    } else if (*ill) {
      const Medium m = read_medium(i_medium);
      IlluminationConfig ic;
      ic.kind = i_kind;
      ic.count = i_count;
      for (const auto& d : i_dirs) {
        if (d.size() != 3) throw ConfigError("--direction needs x,y,z");
        ic.directions.push_back(to_vec3(d));
      }
      ic.s = i_s;
      if (!i_rho.empty() || !i_rho_perp.empty()) {
        if (i_rho.empty() || i_rho_perp.empty()) throw ConfigError("--rho and --rho-perp go together");
        ic.rho_pairs.emplace_back(to_vec3(i_rho), to_vec3(i_rho_perp));
      }
      if (ic.kind == "plane" && ic.directions.empty()) throw ConfigError("--kind plane needs --direction");
      if (ic.kind == "cgo" && !(ic.s > 0.0)) throw ConfigError("--kind cgo needs --s > 0");
      write_illumination_set(i_out, illumination_fields(ic, m), illumination_spec(ic).dump());
      write_manifest(i_out, meta("illum"));
    } else if (*cgo) {
      const Medium m = read_medium(c_medium);
      CgoOptions opt;
      opt.tol = c_tol;
      opt.box_factor = c_box;
      opt.denom_floor_rel = c_floor;
      fs::create_directories(c_out);
      json mt = meta("cgo");
      if (!c_study.empty()) {
        const DecayStudy ds = decay_study(m, to_vec3(c_rho), to_vec3(c_rho_perp), c_study, opt);
        std::ofstream os(fs::path(c_out) / "decay.csv");
        os << "s,zeta_norm,r_norm,slope,scaled,residual,terms\n";
        for (const auto& r : ds.rows)
          os << fmt(r.s) << "," << fmt(r.zeta_norm) << "," << fmt(r.r_norm) << "," << fmt(ds.slope) << ","
             << fmt(r.scaled) << "," << fmt(r.residual) << "," << r.terms << "\n";
        mt["slope"] = ds.slope;
      }
      if (c_s > 0.0) {
        const double k = m.omega * std::sqrt(background_n(m, opt.collar));
        const CgoSolution sol = cgo_solve(m, cgo_params(c_s, to_vec3(c_rho), to_vec3(c_rho_perp), k), opt);
        write_vector_field(c_out, "E_cgo", sol.E);
        write_json_file(fs::path(c_out) / "summary.json",
                        {{"s", c_s},
                         {"k", k},
                         {"series_terms", sol.rq.series_terms},
                         {"tail_norm", sol.rq.tail_norm},
                         {"remainder_norm", remainder_norm(sol)},
                         {"residual", cgo_residual(sol)},
                         {"min_denom", sol.kernel.min_denom},
                         {"min_abs_E", sol.min_abs_E}});
      } else if (c_study.empty()) {
        throw ConfigError("cgo needs --s or --study-decay");
      }
      write_manifest(c_out, mt);
    } else if (*sym) {
      const Medium m = read_medium(s_medium);
      const auto E = read_vector_fields(s_fields, "E");
      EllipticityOptions eo;
      eo.xi_samples = s_xi;
      eo.min_distance = s_min_dist;
      const json rep = symbol_report(E, m, eo);
      write_json_file(s_report, rep);
      std::cout << "min_margin " << fmt(rep["min_margin"].get<double>()) << (rep["pass"].get<bool>() ? " pass" : " FAIL")
                << "\n";
    } else if (*inv) {
      InversionInputs in;
      Grid g;
      in.data.H = read_scalar_fields(v_data, "H", &g);
      in.data.grid = g;
      in.init = read_medium(v_init);
      const IlluminationSet il = read_illumination_set(v_illum);
      in.illum = il.traces;
      if (!v_traces.empty()) in.trace_fields = read_vector_fields(v_traces, "E");
      if (!v_truth.empty()) in.truth = read_medium(v_truth);
      in.gn.linear = v_mode == "linear";
      in.gn.max_iter = v_max_iter;
      in.gn.tol = v_tol;
      in.gn.freeze_dn = v_freeze_dn;
      if (v_reg >= 0.0) in.gn.inner.reg = v_reg;
      in.gn.inner.tol = v_inner_tol;
      in.gn.forward.tol = v_fwd_tol;
      json mt = meta("invert");
      mt["summary"] = run_inversion(in, v_out);
      write_manifest(v_out, mt);
    } else if (*pip) {
      const ExperimentConfig cfg = load_config(p_config);
      const PipelineResult r = run_pipeline(cfg, p_out);
      if (r.manifest["metrics"].contains("reconstruction"))
        std::cout << "reconstruction " << r.manifest["metrics"]["reconstruction"].dump() << "\n";
      std::cout << "manifest " << (fs::path(p_out) / "manifest.json").string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "qtat: error: " << e.what() << "\n";
    if (const std::string hint = remediation_hint(e); !hint.empty()) std::cerr << "hint: " << hint << "\n";
    return exit_code_of(e);
  }
  return 0;
}
