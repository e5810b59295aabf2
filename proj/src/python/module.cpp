#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qtat/cgo.hpp"
#include "qtat/errors.hpp"
#include "qtat/forward.hpp"
#include "qtat/illum.hpp"
#include "qtat/inverse.hpp"
#include "qtat/medium.hpp"
#include "qtat/pipeline.hpp"
#include "qtat/symbols.hpp"

namespace py = pybind11;
using namespace qtat;

namespace {

using FieldArray = Eigen::Matrix<cplx, Eigen::Dynamic, 3, Eigen::RowMajor>;

FieldArray to_array(const VectorField& E) {
  return Eigen::Map<const FieldArray>(E.values.data(), static_cast<Eigen::Index>(E.nodes()), 3);
}

VectorField to_field(const Grid& g, const FieldArray& a) {
  if (a.rows() != static_cast<Eigen::Index>(g.size()))
    throw GridMismatch("field has " + std::to_string(a.rows()) + " rows, grid has " + std::to_string(g.size()) +
                       " nodes");
  Eigen::VectorXcd v(3 * a.rows());
  Eigen::Map<FieldArray>(v.data(), a.rows(), 3) = a;
  return VectorField(g, std::move(v));
}

std::vector<VectorField> to_fields(const Grid& g, const std::vector<FieldArray>& a) {
  std::vector<VectorField> out;
  for (const auto& x : a) out.push_back(to_field(g, x));
  return out;
}

std::vector<FieldArray> to_arrays(const std::vector<VectorField>& E) {
  std::vector<FieldArray> out;
  for (const auto& x : E) out.push_back(to_array(x));
  return out;
}

// nlohmann -> Python through the json module keeps the binding free of a converter.
py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

// center defaults to the grid center
Bump bump_from(const py::dict& d, const Grid& g) {
  Bump b;
  b.center = g.center();
  if (d.contains("center")) b.center = d["center"].cast<std::array<double, 3>>();
  b.radius = d["radius"].cast<double>();
  if (d.contains("dn")) b.dn = d["dn"].cast<double>();
  if (d.contains("dsigma")) b.dsigma = d["dsigma"].cast<double>();
  return b;
}

}  // namespace

PYBIND11_MODULE(_qtat, m) {
  m.doc() = "Quantitative thermoacoustic tomography toolkit";
  m.attr("__version__") = QTAT_VERSION;
  m.def("version_text", &version_text);

  static py::exception<Error> base(m, "QtatError", PyExc_RuntimeError);
#define QTAT_PY_ERROR(Name) py::register_exception<Name>(m, #Name, base.ptr())
  QTAT_PY_ERROR(AdmissibilityError);
  QTAT_PY_ERROR(ParamError);
  QTAT_PY_ERROR(GridMismatch);
  QTAT_PY_ERROR(DivisionByZero);
  QTAT_PY_ERROR(NoConvergence);
  QTAT_PY_ERROR(ResolutionError);
  QTAT_PY_ERROR(DegenerateInput);
  QTAT_PY_ERROR(OrthogonalityError);
  QTAT_PY_ERROR(DimensionError);
  QTAT_PY_ERROR(ResonanceError);
  QTAT_PY_ERROR(SupportError);
  QTAT_PY_ERROR(NoContraction);
  QTAT_PY_ERROR(ZeroFieldError);
  QTAT_PY_ERROR(DegenerateCase);
  QTAT_PY_ERROR(Divergence);
  QTAT_PY_ERROR(ConfigError);
  QTAT_PY_ERROR(IoError);
#undef QTAT_PY_ERROR

  py::class_<Grid>(m, "Grid")
      .def(py::init<std::array<int, 3>, double, std::array<double, 3>>(), py::arg("dims"), py::arg("spacing"),
           py::arg("origin") = std::array<double, 3>{0, 0, 0})
      .def_static("unit_cube", &Grid::unit_cube, py::arg("n"))
      .def_readonly("dims", &Grid::dims)
      .def_readonly("spacing", &Grid::spacing)
      .def_readonly("origin", &Grid::origin)
      .def_property_readonly("size", &Grid::size)
      .def("index", &Grid::index)
      .def("coord", &Grid::coord)
      .def("__eq__", &Grid::operator==)
      .def("__repr__", [](const Grid& g) {
        return "Grid(dims=(" + std::to_string(g.dims[0]) + ", " + std::to_string(g.dims[1]) + ", " +
               std::to_string(g.dims[2]) + "), spacing=" + std::to_string(g.spacing) + ")";
      });

  py::class_<Medium>(m, "Medium")
      .def_readonly("grid", &Medium::grid)
      .def_readonly("n", &Medium::n)
      .def_readonly("sigma", &Medium::sigma)
      .def_readonly("omega", &Medium::omega);

  m.def(
      "make_medium",
      [](const Grid& g, Eigen::VectorXd n, Eigen::VectorXd sigma, double omega) {
        return make_medium(g, std::move(n), std::move(sigma), omega);
      },
      py::arg("grid"), py::arg("n"), py::arg("sigma"), py::arg("omega"));
  m.def(
      "make_phantom",
      [](const std::string& kind, const Grid& g, double omega, double n_background, double sigma_background,
         const std::vector<py::dict>& bumps, const std::string& profile) {
        PhantomParams pp;
        pp.omega = omega;
        pp.n_background = n_background;
        pp.sigma_background = sigma_background;
        pp.profile = parse_bump_profile(profile);
        for (const auto& b : bumps) pp.bumps.push_back(bump_from(b, g));
        return make_phantom(parse_phantom_kind(kind), g, pp);
      },
      py::arg("kind"), py::arg("grid"), py::arg("omega"), py::arg("n_background") = 1.0,
      py::arg("sigma_background") = 0.0, py::arg("bumps") = std::vector<py::dict>{},
      py::arg("profile") = "gaussian");
  m.def("eval_q", &eval_q);
  m.def("derived_fields", [](const Medium& med) {
    const DerivedFields d = derived_fields(med);
    py::dict out;
    out["q"] = d.q;
    out["kappa"] = d.kappa;
    out["tau_n"] = d.tau_n;
    out["tau_h"] = d.tau_h;
    return out;
  });

  m.def(
      "plane_wave_fields",
      [](const Medium& med, int count) {
        IlluminationConfig ic;
        ic.count = count;
        return to_arrays(illumination_fields(ic, med));
      },
      py::arg("medium"), py::arg("count") = 4,
      "Plane waves of the direction family for the constant q of medium node 0.");

  m.def(
      "solve_forward",
      [](const Medium& med, const std::vector<FieldArray>& boundary_fields, double tol) {
        std::vector<BoundaryIllumination> il;
        for (const auto& f : to_fields(med.grid, boundary_fields)) il.push_back(boundary_trace(f));
        SolverConfig sc;
        sc.tol = tol;
        py::gil_scoped_release nogil;
        return to_arrays(solve_forward(med, il, sc));
      },
      py::arg("medium"), py::arg("boundary_fields"), py::arg("tol") = 1e-10,
      "Solves with the tangential traces of the given fields as boundary data.");

  m.def(
      "internal_data",
      [](const Medium& med, const FieldArray& E) { return internal_data(med.sigma, to_field(med.grid, E)); },
      py::arg("medium"), py::arg("E"));

  m.def(
      "ellipticity_scan",
      [](const std::vector<FieldArray>& E, const Medium& med, int xi_samples, int min_distance) {
        EllipticityOptions opt;
        opt.xi_samples = xi_samples;
        opt.min_distance = min_distance;
        const auto fields = to_fields(med.grid, E);
        EllipticityReport r;
        {
          py::gil_scoped_release nogil;
          r = ellipticity_scan(fields, med, opt);
        }
        py::dict out;
        out["min_margin"] = r.min_margin;
        out["min_sigma"] = r.min_sigma;
        out["argmin_node"] = r.argmin_node;
        out["argmin_xi"] = r.argmin_xi;
        out["point_margin"] = r.point_margin;
        out["passed"] = r.pass;
        return out;
      },
      py::arg("fields"), py::arg("medium"), py::arg("xi_samples") = 2048, py::arg("min_distance") = 0);

  m.def("hyperbolic_threshold", [](const Vec3c& E) { return hyperbolic_threshold(E); }, py::arg("E_hat"));
  m.def("hyperbolicity_test", &hyperbolicity_test, py::arg("E_hat"), py::arg("tau_h"));
  m.def("lopatinskii_lambdas", &lopatinskii_lambdas, py::arg("a"), py::arg("b"), py::arg("c"), py::arg("zeta_norm"));
  m.def(
      "lopatinskii_check",
      [](const Vec3c& E1, const Vec3c& E2, const Vec3d& nu, const Vec3d& zeta, double kappa, double tau) {
        const LopatinskiiReport r = lopatinskii_check(E1, E2, nu, zeta, kappa, tau);
        py::dict out;
        out["a"] = r.frak_a;
        out["b"] = r.frak_b;
        out["c"] = r.frak_c;
        out["discriminant"] = r.discriminant;
        out["lambdas"] = r.lambdas;
        out["decaying"] = r.decaying;
        out["verdict"] = to_string(r.verdict);
        return out;
      },
      py::arg("E1"), py::arg("E2"), py::arg("nu"), py::arg("zeta_tan"), py::arg("kappa"), py::arg("tau_n"));

  m.def(
      "cgo_decay_study",
      [](const Medium& med, const Vec3d& rho, const Vec3d& rho_perp, const std::vector<double>& s) {
        DecayStudy st;
        {
          py::gil_scoped_release nogil;
          st = decay_study(med, rho, rho_perp, s);
        }
        py::dict out;
        py::list rows;
        for (const auto& r : st.rows) {
          py::dict d;
          d["s"] = r.s;
          d["zeta_norm"] = r.zeta_norm;
          d["remainder_norm"] = r.r_norm;
          d["scaled"] = r.scaled;
          d["residual"] = r.residual;
          rows.append(d);
        }
        out["rows"] = rows;
        out["slope"] = st.slope;
        return out;
      },
      py::arg("medium"), py::arg("rho"), py::arg("rho_perp"), py::arg("s_values"));

  m.def(
      "gauss_newton",
      [](const std::vector<Eigen::VectorXd>& H, const Medium& init, const std::vector<FieldArray>& boundary_fields,
         int max_iter, bool freeze_dn, double inner_tol, double forward_tol) {
        const auto fields = to_fields(init.grid, boundary_fields);
        std::vector<BoundaryIllumination> il;
        for (const auto& f : fields) il.push_back(boundary_trace(f));
        GaussNewtonConfig cfg;
        cfg.max_iter = max_iter;
        cfg.freeze_dn = freeze_dn;
        cfg.inner.tol = inner_tol;
        cfg.forward.tol = forward_tol;
        cfg.boundary_fields = fields;
        ReconstructionResult r;
        {
          py::gil_scoped_release nogil;
          r = gauss_newton(InternalData{init.grid, H}, init, il, cfg);
        }
        py::dict out;
        out["medium"] = r.medium;
        out["iterations"] = r.iterations;
        out["residual_history"] = r.residual_history;
        out["boundary_mismatch"] = r.boundary_mismatch;
        return out;
      },
      py::arg("H"), py::arg("init"), py::arg("boundary_fields"), py::arg("max_iter") = 10,
      py::arg("freeze_dn") = false, py::arg("inner_tol") = 1e-6, py::arg("forward_tol") = 1e-10,
      "boundary_fields are the measured fields; their values on the two outer node layers are imposed.");
  m.def("relative_error", &relative_error, py::arg("recon"), py::arg("truth"));

  m.def(
      "run_pipeline",
      [](const std::string& config_text, const fs::path& out) {
        const ExperimentConfig cfg = parse_config(config_text, "config");
        PipelineResult r;
        {
          py::gil_scoped_release nogil;
          r = run_pipeline(cfg, out);
        }
        return to_python(r.manifest);
      },
      py::arg("config"), py::arg("out"), "Runs the pipeline on a JSON config string; returns the manifest.");
  m.def(
      "check_config", [](const std::string& text) { parse_config(text, "config"); }, py::arg("config"));
}
