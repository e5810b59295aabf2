#include "qtat/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "qtat/errors.hpp"
#include "qtat/io.hpp"

namespace qtat {

using nlohmann::json;

int exit_code_of(const std::exception& e) {
  if (dynamic_cast<const ResonanceError*>(&e)) return kExitResonance;
  if (dynamic_cast<const Divergence*>(&e)) return kExitDivergence;
  if (dynamic_cast<const NoConvergence*>(&e) || dynamic_cast<const NoContraction*>(&e) ||
      dynamic_cast<const DivisionByZero*>(&e) || dynamic_cast<const ZeroFieldError*>(&e) ||
      dynamic_cast<const DegenerateInput*>(&e) || dynamic_cast<const DegenerateCase*>(&e))
    return kExitSolver;
  if (dynamic_cast<const Error*>(&e) || dynamic_cast<const json::exception*>(&e)) return kExitConfig;
  return kExitSolver;
}

std::string remediation_hint(const std::exception& e) {
  if (dynamic_cast<const ResonanceError*>(&e))
    return "a Fourier lattice frequency sits on the Faddeev resonance set; lower s, change box_factor, or "
           "lower the denominator floor";
  if (dynamic_cast<const Divergence*>(&e))
    return "reduce the perturbation, enable freeze_dn, or start from a closer initial medium";
  if (dynamic_cast<const NoConvergence*>(&e)) return "raise max_iter, loosen tol, or set an explicit reg";
  if (dynamic_cast<const NoContraction*>(&e)) return "increase s; the Neumann series contracts only for large |zeta|";
  if (dynamic_cast<const ResolutionError*>(&e)) return "refine the grid or lower omega";
  return {};
}

namespace {

// --- config parsing -------------------------------------------------------

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) bad(path + "." + k, "unknown key");
}

double num(const json& j, const char* key, const std::string& path, double def) {
  if (!j.contains(key) || j.at(key).is_null()) return def;
  if (!j.at(key).is_number()) bad(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

int integer(const json& j, const char* key, const std::string& path, int def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number_integer()) bad(path + "." + key, "expected an integer");
  return j.at(key).get<int>();
}

bool boolean(const json& j, const char* key, const std::string& path, bool def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean()) bad(path + "." + key, "expected true or false");
  return j.at(key).get<bool>();
}

std::string text(const json& j, const char* key, const std::string& path, const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string()) bad(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

Vec3d vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) bad(path, "expected an array of 3 numbers");
  Vec3d v;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) bad(path, "expected an array of 3 numbers");
    v[a] = j[a].get<double>();
  }
  return v;
}

std::vector<double> num_list(const json& j, const char* key, const std::string& path) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) bad(path + "." + key, "expected an array of numbers");
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) bad(path + "." + key, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

template <class F>
auto checked(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (std::string(e.what()).rfind(path, 0) == 0) throw;
    bad(path, e.what());
  }
}

std::pair<int, int> line_column(const std::string& s, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < s.size(); ++i) {
    if (s[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_text(const fs::path& file, const std::string& s) {
  fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os << s;
}

void write_json_file(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

json vec_json(const Vec3d& v) { return json::array({v[0], v[1], v[2]}); }

}  // namespace

ExperimentConfig parse_config(const std::string& src, const std::string& origin) {
  json j;
  try {
    j = json::parse(src);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(src, e.byte);
    std::string msg = e.what();
    if (const auto p = msg.find(", column "); p != std::string::npos)
      if (const auto q = msg.find(": ", p); q != std::string::npos) msg = msg.substr(q + 2);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON: " + msg);
  }
  ExperimentConfig c;
  c.source_text = src;
  only_keys(j, origin, {"schema_version", "rng_seed", "grid", "medium", "illumination", "solver", "symbols",
                        "inversion", "sweeps"});
  c.schema_version = integer(j, "schema_version", origin, kConfigSchemaVersion);
  if (c.schema_version != kConfigSchemaVersion)
    bad(origin + ".schema_version", "unsupported revision " + std::to_string(c.schema_version));
  if (j.contains("rng_seed")) {
    if (!j["rng_seed"].is_number_unsigned()) bad(origin + ".rng_seed", "expected a non-negative integer");
    c.rng_seed = j["rng_seed"].get<unsigned long long>();
  }

  const json grid = j.value("grid", json::object());
  only_keys(grid, "grid", {"n"});
  c.grid_n = integer(grid, "n", "grid", c.grid_n);
  if (c.grid_n < 8) bad("grid.n", "needs at least 8 nodes per axis");

  const json med = j.value("medium", json::object());
  only_keys(med, "medium",
            {"phantom", "omega", "n_background", "sigma_background", "profile", "bumps", "collar", "n_floor"});
  c.phantom = checked("medium.phantom", [&] { return parse_phantom_kind(text(med, "phantom", "medium", "smooth_bump")); });
  PhantomParams& pp = c.medium;
  pp.omega = num(med, "omega", "medium", 1.0);
  pp.n_background = num(med, "n_background", "medium", 1.0);
  pp.sigma_background = num(med, "sigma_background", "medium", 0.0);
  pp.profile = checked("medium.profile", [&] { return parse_bump_profile(text(med, "profile", "medium", "gaussian")); });
  pp.collar = integer(med, "collar", "medium", pp.collar);
  pp.n_floor = num(med, "n_floor", "medium", pp.n_floor);
  const double h = 1.0 / (c.grid_n - 1);
  if (med.contains("bumps")) {
    if (!med["bumps"].is_array()) bad("medium.bumps", "expected an array");
    for (std::size_t b = 0; b < med["bumps"].size(); ++b) {
      const std::string path = "medium.bumps[" + std::to_string(b) + "]";
      const json& bj = med["bumps"][b];
      only_keys(bj, path, {"center", "radius", "dn", "dsigma"});
      Bump bump;
      const Vec3d ctr = bj.contains("center") ? vec3(bj["center"], path + ".center") : Vec3d(0.5, 0.5, 0.5);
      bump.center = {ctr[0], ctr[1], ctr[2]};
      bump.radius = num(bj, "radius", path, 0.5 - 3.0 * h);
      bump.dn = num(bj, "dn", path, 0.0);
      bump.dsigma = num(bj, "dsigma", path, 0.0);
      pp.bumps.push_back(bump);
    }
  }

  const json il = j.value("illumination", json::object());
  only_keys(il, "illumination", {"kind", "count", "directions", "s", "rho_pairs"});
  IlluminationConfig& ic = c.illumination;
  ic.kind = text(il, "kind", "illumination", ic.kind);
  ic.count = integer(il, "count", "illumination", ic.count);
  if (il.contains("directions")) {
    if (!il["directions"].is_array()) bad("illumination.directions", "expected an array");
    for (std::size_t k = 0; k < il["directions"].size(); ++k)
      ic.directions.push_back(vec3(il["directions"][k], "illumination.directions[" + std::to_string(k) + "]"));
  }
  ic.s = num(il, "s", "illumination", ic.s);
  if (il.contains("rho_pairs")) {
    if (!il["rho_pairs"].is_array()) bad("illumination.rho_pairs", "expected an array");
    for (std::size_t k = 0; k < il["rho_pairs"].size(); ++k) {
      const std::string path = "illumination.rho_pairs[" + std::to_string(k) + "]";
      const json& pj = il["rho_pairs"][k];
      if (!pj.is_array() || pj.size() != 2) bad(path, "expected [rho, rho_perp]");
      ic.rho_pairs.emplace_back(vec3(pj[0], path + "[0]"), vec3(pj[1], path + "[1]"));
    }
  }
  if (ic.kind != "family" && ic.kind != "plane" && ic.kind != "cgo")
    bad("illumination.kind", "expected family, plane or cgo, got " + ic.kind);
  if (ic.kind == "family" && (ic.count < 1 || ic.count > 4)) bad("illumination.count", "family has 1..4 members");
  if (ic.kind == "plane" && ic.directions.empty()) bad("illumination.directions", "plane needs directions");
  if (ic.kind == "cgo" && !(ic.s > 0.0)) bad("illumination.s", "cgo needs s > 0");

  const json so = j.value("solver", json::object());
  only_keys(so, "solver", {"tol", "max_iter", "method"});
  c.solver.tol = num(so, "tol", "solver", 1e-10);
  c.solver.max_iter = integer(so, "max_iter", "solver", c.solver.max_iter);
  const std::string method = text(so, "method", "solver", "automatic");
  if (method == "automatic") c.solver.method = SolverConfig::Method::automatic;
  else if (method == "krylov") c.solver.method = SolverConfig::Method::krylov;
  else if (method == "direct") c.solver.method = SolverConfig::Method::direct;
  else bad("solver.method", "expected automatic, krylov or direct");

  const json sy = j.value("symbols", json::object());
  only_keys(sy, "symbols", {"enabled", "xi_samples", "min_distance"});
  c.symbols.enabled = boolean(sy, "enabled", "symbols", c.symbols.enabled);
  c.symbols.xi_samples = integer(sy, "xi_samples", "symbols", c.symbols.xi_samples);
  c.symbols.min_distance = integer(sy, "min_distance", "symbols", c.symbols.min_distance);
  if (c.symbols.xi_samples < 1) bad("symbols.xi_samples", "must be positive");

  const json inv = j.value("inversion", json::object());
  only_keys(inv, "inversion",
            {"enabled", "mode", "max_iter", "reg", "inner_tol", "tol", "stagnation", "freeze_dn", "noise_level"});
  InversionConfig& ivc = c.inversion;
  ivc.enabled = boolean(inv, "enabled", "inversion", ivc.enabled);
  ivc.mode = text(inv, "mode", "inversion", ivc.mode);
  if (ivc.mode != "newton" && ivc.mode != "linear") bad("inversion.mode", "expected newton or linear");
  ivc.max_iter = integer(inv, "max_iter", "inversion", ivc.max_iter);
  if (inv.contains("reg") && !inv["reg"].is_null()) ivc.reg = num(inv, "reg", "inversion", 0.0);
  ivc.inner_tol = num(inv, "inner_tol", "inversion", ivc.inner_tol);
  ivc.tol = num(inv, "tol", "inversion", ivc.tol);
  ivc.stagnation = num(inv, "stagnation", "inversion", ivc.stagnation);
  ivc.freeze_dn = boolean(inv, "freeze_dn", "inversion", ivc.freeze_dn);
  ivc.noise_level = num(inv, "noise_level", "inversion", ivc.noise_level);
  if (ivc.max_iter < 1) bad("inversion.max_iter", "must be positive");
  if (ivc.reg && *ivc.reg < 0.0) bad("inversion.reg", "must be >= 0");
  if (ivc.noise_level < 0.0) bad("inversion.noise_level", "must be >= 0");

  const json sw = j.value("sweeps", json::object());
  only_keys(sw, "sweeps", {"noise_levels", "reg_values", "trace_corruption", "s_values", "rho", "rho_perp"});
  c.sweeps.noise_levels = num_list(sw, "noise_levels", "sweeps");
  c.sweeps.reg_values = num_list(sw, "reg_values", "sweeps");
  c.sweeps.trace_corruption = num_list(sw, "trace_corruption", "sweeps");
  c.sweeps.s_values = num_list(sw, "s_values", "sweeps");
  if (sw.contains("rho")) c.sweeps.rho = vec3(sw["rho"], "sweeps.rho");
  if (sw.contains("rho_perp")) c.sweeps.rho_perp = vec3(sw["rho_perp"], "sweeps.rho_perp");

  // build once so admissibility and resolution problems surface as config errors
  checked("medium", [&] { return truth_medium(c); });
  return c;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), file.string());
}

Medium truth_medium(const ExperimentConfig& cfg) {
  return make_phantom(cfg.phantom, Grid::unit_cube(cfg.grid_n), cfg.medium);
}

Medium initial_medium(const ExperimentConfig& cfg) {
  PhantomParams bg = cfg.medium;
  bg.bumps.clear();
  return make_phantom(PhantomKind::constant, Grid::unit_cube(cfg.grid_n), bg);
}

std::vector<VectorField> illumination_fields(const IlluminationConfig& ic, const Medium& background) {
  const Grid& g = background.grid;
  const cplx q0 = eval_q(background)[0];
  std::vector<VectorField> out;
  if (ic.kind == "family") {
    const auto fam = plane_wave_family(q0, direction_family(3));
    if (ic.count < 1 || ic.count > static_cast<int>(fam.size())) throw ParamError("illumination count out of range");
    for (int j = 0; j < ic.count; ++j) out.push_back(plane_wave_field(g, fam[j]));
  } else if (ic.kind == "plane") {
    for (const auto& d : ic.directions) out.push_back(plane_wave_field(g, plane_wave_params(q0, d)));
  } else if (ic.kind == "cgo") {
    std::vector<std::pair<Vec3d, Vec3d>> pairs = ic.rho_pairs;
    if (pairs.empty())
      for (const auto& pr : direction_family(3).pairs) pairs.emplace_back(Vec3d(pr.rho), Vec3d(pr.rho_perp));
    const double k = background.omega * std::sqrt(background_n(background, 2));
    for (const auto& [rho, rp] : pairs) out.push_back(cgo_field(background, cgo_params(ic.s, rho, rp, k)));
  } else {
    throw ParamError("unknown illumination kind " + ic.kind);
  }
  return out;
}

json illumination_spec(const IlluminationConfig& ic) {
  json j{{"kind", ic.kind}};
  if (ic.kind == "family") j["count"] = ic.count;
  if (ic.kind == "plane") {
    j["directions"] = json::array();
    for (const auto& d : ic.directions) j["directions"].push_back(vec_json(d));
  }
  if (ic.kind == "cgo") {
    j["s"] = ic.s;
    j["rho_pairs"] = json::array();
    for (const auto& [r, rp] : ic.rho_pairs) j["rho_pairs"].push_back({vec_json(r), vec_json(rp)});
  }
  return j;
}

json symbol_report(const std::vector<VectorField>& E, const Medium& m, const EllipticityOptions& opt) {
  const EllipticityReport rep = ellipticity_scan(E, m, opt);
  json j{{"xi_samples", opt.xi_samples},
         {"rank_rel_tol", rep.rank_rel_tol},
         {"min_distance", opt.min_distance},
         {"min_margin", rep.min_margin},
         {"min_sigma", rep.min_sigma},
         {"pass", rep.pass},
         {"argmin", {{"node", rep.argmin_node}, {"x", vec_json(rep.argmin_x)}, {"xi", vec_json(rep.argmin_xi)}}}};
  json points = json::array();
  for (std::size_t p = 0; p < rep.point_margin.size(); ++p) {
    if (std::isnan(rep.point_margin[p])) continue;
    points.push_back({{"node", p}, {"margin", rep.point_margin[p]}, {"worst_xi", vec_json(rep.point_worst_xi[p])}});
  }
  j["points"] = std::move(points);

  const Grid& g = m.grid;
  const DerivedFields D = derived_fields(m);
  json samples = json::array();
  int covering = 0, not_covering = 0, degenerate = 0, positive = 0;
  for (int face = 0; face < 6; ++face) {
    const auto ax = face_axes(face);
    const Vec3d nu = face_normal(face);
    const Vec3d t1 = Vec3d::Unit(ax[0]), t2 = Vec3d::Unit(ax[1]);
    for (int a = 1; a <= 3; ++a)
      for (int b = 1; b <= 3; ++b) {
        const int u = a * (g.dims[ax[0]] - 1) / 4, v = b * (g.dims[ax[1]] - 1) / 4;
        const std::size_t node = face_node_to_grid(g, face, u, v);
        std::vector<Vec3c> Ex;
        for (const auto& f : E) Ex.push_back(f.at(node));
        for (const Vec3d& zt : {t1, t2, Vec3d((t1 + t2).normalized())}) {
          json s{{"node", node}, {"face", face}, {"zeta_tan", vec_json(zt)}};
          try {
            const LopatinskiiReport r = lopatinskii_check_family(Ex, nu, zt, D.kappa[node], D.tau_n[node]);
            s["verdict"] = to_string(r.verdict);
            s["discriminant"] = r.discriminant;
            s["independence"] = r.independence;
            s["pair"] = {r.pair_j, r.pair_l};
            if (r.discriminant > 0.0) ++positive;
            if (r.verdict == LopatinskiiVerdict::covering) ++covering;
            else if (r.verdict == LopatinskiiVerdict::not_covering) ++not_covering;
            else ++degenerate;
          } catch (const DegenerateCase&) {
            s["verdict"] = to_string(LopatinskiiVerdict::degenerate);
            ++degenerate;
          }
          samples.push_back(std::move(s));
        }
      }
  }
  j["lopatinskii"] = {{"covering", covering},
                      {"not_covering", not_covering},
                      {"degenerate", degenerate},
                      {"positive_discriminant", positive},
                      {"samples", std::move(samples)}};
  return j;
}

json run_inversion(const InversionInputs& in, const fs::path& dir) {
  GaussNewtonConfig gn = in.gn;
  if (in.trace_fields) gn.boundary_fields = *in.trace_fields;
  const ReconstructionResult r = gauss_newton(in.data, in.init, in.illum, gn);
  fs::create_directories(dir);
  write_medium(dir / "medium", r.medium);
  write_vector_fields(dir, "E", r.E);
  if (gn.linear) {
    write_scalar_field(dir, "delta_sigma", r.medium.grid, r.delta_sigma);
    write_scalar_field(dir, "delta_n", r.medium.grid, r.delta_n);
  }
  std::ostringstream csv;
  csv << "iteration,residual\n";
  for (std::size_t i = 0; i < r.residual_history.size(); ++i) csv << i << "," << fmt(r.residual_history[i]) << "\n";
  write_text(dir / "residual.csv", csv.str());

  // stability pair: reconstruction against the reference medium, both with
  // their own forward fields and noise-free data
  SolverConfig fc = gn.forward;
  fc.check_resolution = false;
  const Medium& ref = in.truth ? *in.truth : in.init;
  const auto Eref = solve_forward(ref, in.illum, fc);
  const auto Erec = solve_forward(r.medium, in.illum, fc);
  const auto rows = stability_report(stability_inputs(r.medium, Erec, internal_data(r.medium.sigma, Erec).H, ref,
                                                      Eref, internal_data(ref.sigma, Eref).H));
  json st{{"reference", in.truth ? "truth" : "init"}, {"rows", json::array()}};
  for (const auto& row : rows)
    st["rows"].push_back({{"order", row.order},
                          {"lhs", row.lhs},
                          {"data", row.data},
                          {"trace_value", row.trace_value},
                          {"trace_normal", row.trace_normal},
                          {"ratio", row.ratio}});
  write_json_file(dir / "stability.json", st);

  json s{{"mode", gn.linear ? "linear" : "newton"},
         {"iterations", r.iterations},
         {"residual_history", r.residual_history},
         {"final_residual", r.residual_history.back()},
         {"boundary_mismatch", r.boundary_mismatch},
         {"traces", in.trace_fields ? "measured" : "initial_forward"}};
  if (in.truth) {
    const Medium& t = *in.truth;
    s["relative_error"] = relative_error(r.medium, t);
    s["sigma_relative_error"] = (r.medium.sigma - t.sigma).norm() / t.sigma.norm();
    s["n_relative_error"] = (r.medium.n - t.n).norm() / t.n.norm();
    const double pert = std::sqrt((t.sigma - in.init.sigma).squaredNorm() + (t.n - in.init.n).squaredNorm());
    if (pert > 0.0)
      s["perturbation_relative_error"] =
          std::sqrt((r.medium.sigma - t.sigma).squaredNorm() + (r.medium.n - t.n).squaredNorm()) / pert;
  }
  write_json_file(dir / "summary.json", s);
  return s;
}

json write_manifest(const fs::path& dir, json meta) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel != "manifest.json") files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  json outputs = json::array();
  for (const auto& f : files)
    outputs.push_back({{"path", f}, {"bytes", fs::file_size(dir / f)}, {"sha256", sha256_file(dir / f)}});
  meta["schema_version"] = kManifestSchemaVersion;
  meta["qtat_version"] = QTAT_VERSION;
  meta["outputs"] = std::move(outputs);
  write_json_file(dir / "manifest.json", meta);
  return meta;
}

namespace {

std::vector<VectorField> corrupt_trace_layers(const std::vector<VectorField>& E, double level,
                                              unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<VectorField> out = E;
  for (auto& f : out) {
    const Grid& g = f.grid;
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto ijk = g.unravel(p);
      if (g.boundary_distance(ijk[0], ijk[1], ijk[2]) >= kTraceLayers) continue;
      for (int c = 0; c < 3; ++c) {
        const double a = nd(rng), b = nd(rng);
        f.values[3 * p + c] *= 1.0 + level * cplx(a, b);
      }
    }
  }
  return out;
}

GaussNewtonConfig gn_config(const ExperimentConfig& cfg) {
  GaussNewtonConfig gn;
  const InversionConfig& ic = cfg.inversion;
  gn.max_iter = ic.max_iter;
  gn.tol = ic.tol;
  gn.stagnation = ic.stagnation;
  gn.freeze_dn = ic.freeze_dn;
  gn.linear = ic.mode == "linear";
  gn.n_floor = cfg.medium.n_floor;
  gn.inner.reg = ic.reg;
  gn.inner.tol = ic.inner_tol;
  gn.forward = cfg.solver;
  return gn;
}

json sweep_row(double value, const json& s) {
  json row{{"value", value}};
  for (const char* k : {"relative_error", "sigma_relative_error", "n_relative_error", "perturbation_relative_error",
                        "boundary_mismatch", "iterations", "final_residual"})
    if (s.contains(k)) row[k] = s[k];
  return row;
}

void write_sweep_csv(const fs::path& file, const char* name, const json& rows) {
  std::ostringstream os;
  os << name
     << ",relative_error,sigma_relative_error,n_relative_error,perturbation_relative_error,boundary_mismatch,"
        "iterations\n";
  for (const auto& r : rows) {
    os << fmt(r["value"].get<double>());
    for (const char* k : {"relative_error", "sigma_relative_error", "n_relative_error", "perturbation_relative_error",
                          "boundary_mismatch"})
      os << "," << (r.contains(k) ? fmt(r[k].get<double>()) : "");
    os << "," << r["iterations"].get<int>() << "\n";
  }
  write_text(file, os.str());
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg, const fs::path& out) {
  PipelineResult res;
  res.dir = out;
  fs::create_directories(out);
  write_text(out / "config.json", cfg.source_text);

  const Medium truth = truth_medium(cfg);
  const Medium init = initial_medium(cfg);
  write_medium(out / "medium_true", truth);
  write_medium(out / "medium_init", init);

  const auto Eill = illumination_fields(cfg.illumination, init);
  write_illumination_set(out / "illum", Eill, illumination_spec(cfg.illumination).dump());
  std::vector<BoundaryIllumination> illum;
  for (const auto& e : Eill) illum.push_back(boundary_trace(e));

  std::vector<SolveReport> reports;
  const auto Et = solve_forward(truth, illum, cfg.solver, &reports);
  const InternalData H = internal_data(truth.sigma, Et);
  write_vector_fields(out / "forward", "E", Et);
  write_scalar_fields(out / "forward", "H", truth.grid, H.H);
  json metrics;
  metrics["forward"] = json::array();
  for (const auto& r : reports)
    metrics["forward"].push_back(
        {{"iterations", r.iterations}, {"relative_residual", r.relative_residual}, {"direct", r.direct}});

  const InternalData data =
      cfg.inversion.noise_level > 0.0 ? add_multiplicative_noise(H, cfg.inversion.noise_level, cfg.rng_seed) : H;
  write_scalar_fields(out / "data", "H", truth.grid, data.H);

  if (cfg.symbols.enabled) {
    EllipticityOptions eo;
    eo.xi_samples = cfg.symbols.xi_samples;
    eo.min_distance = cfg.symbols.min_distance;
    const json rep = symbol_report(Et, truth, eo);
    write_json_file(out / "symbols" / "report.json", rep);
    metrics["symbols"] = {{"min_margin", rep["min_margin"]},
                          {"pass", rep["pass"]},
                          {"lopatinskii_covering", rep["lopatinskii"]["covering"]},
                          {"lopatinskii_not_covering", rep["lopatinskii"]["not_covering"]}};
  }

  const GaussNewtonConfig gn = gn_config(cfg);
  auto inputs = [&](const InternalData& d) {
    InversionInputs in{d, init, illum, Et, truth, gn};
    return in;
  };
  if (cfg.inversion.enabled) {
    const json s = run_inversion(inputs(data), out / "recon");
    metrics["reconstruction"] = sweep_row(cfg.inversion.noise_level, s);
    metrics["reconstruction"].erase("value");
    metrics["reconstruction"]["path"] = "recon";
  }

  json sweeps;
  if (!cfg.sweeps.noise_levels.empty()) {
    json rows = json::array();
    for (std::size_t i = 0; i < cfg.sweeps.noise_levels.size(); ++i) {
      const double lvl = cfg.sweeps.noise_levels[i];
      const InternalData d = lvl > 0.0 ? add_multiplicative_noise(H, lvl, cfg.rng_seed + 1 + i) : H;
      rows.push_back(sweep_row(lvl, run_inversion(inputs(d), out / "sweeps" / ("noise_" + std::to_string(i)))));
    }
    write_sweep_csv(out / "sweeps" / "noise.csv", "noise_level", rows);
    sweeps["noise"] = rows;
  }
  if (!cfg.sweeps.reg_values.empty()) {
    json rows = json::array();
    for (std::size_t i = 0; i < cfg.sweeps.reg_values.size(); ++i) {
      InversionInputs in = inputs(data);
      in.gn.linear = true;
      in.gn.inner.reg = cfg.sweeps.reg_values[i];
      rows.push_back(sweep_row(cfg.sweeps.reg_values[i], run_inversion(in, out / "sweeps" / ("reg_" + std::to_string(i)))));
    }
    write_sweep_csv(out / "sweeps" / "reg.csv", "reg", rows);
    sweeps["reg"] = rows;
  }
  if (!cfg.sweeps.trace_corruption.empty()) {
    json rows = json::array();
    for (std::size_t i = 0; i < cfg.sweeps.trace_corruption.size(); ++i) {
      const double lvl = cfg.sweeps.trace_corruption[i];
      InversionInputs in = inputs(data);
      in.trace_fields = corrupt_trace_layers(Et, lvl, cfg.rng_seed + 1001 + i);
      rows.push_back(sweep_row(lvl, run_inversion(in, out / "sweeps" / ("trace_" + std::to_string(i)))));
    }
    write_sweep_csv(out / "sweeps" / "trace.csv", "trace_corruption", rows);
    sweeps["trace_corruption"] = rows;
  }
  if (!cfg.sweeps.s_values.empty()) {
    const DecayStudy ds = decay_study(truth, cfg.sweeps.rho, cfg.sweeps.rho_perp, cfg.sweeps.s_values);
    std::ostringstream os;
    os << "s,zeta_norm,r_norm,slope,scaled,residual,terms\n";
    for (const auto& r : ds.rows)
      os << fmt(r.s) << "," << fmt(r.zeta_norm) << "," << fmt(r.r_norm) << "," << fmt(ds.slope) << ","
         << fmt(r.scaled) << "," << fmt(r.residual) << "," << r.terms << "\n";
    write_text(out / "sweeps" / "cgo_decay.csv", os.str());
    sweeps["cgo_decay_slope"] = ds.slope;
  }
  if (!sweeps.is_null()) metrics["sweeps"] = sweeps;

  json meta{{"command", "pipeline"},
            {"config_sha256", sha256_hex(cfg.source_text)},
            {"rng_seed", cfg.rng_seed},
            {"threads", omp_get_max_threads()},
            {"inverse_crime", cfg.inversion.enabled},
            {"metrics", metrics}};
  res.manifest = write_manifest(out, meta);
  return res;
}

std::string version_text() {
  std::ostringstream os;
  os << "qtat " << QTAT_VERSION << "\n"
     << "schemas: medium " << kSchemaVersion << ", vector_field " << kSchemaVersion << ", scalar_field "
     << kSchemaVersion << ", illumination " << kSchemaVersion << ", config " << kConfigSchemaVersion
     << ", manifest " << kManifestSchemaVersion << "\n";
  return os.str();
}

}  // namespace qtat
