#include <doctest.h>

#include <cmath>

#include "qtat/errors.hpp"
#include "qtat/forward.hpp"
#include "qtat/illum.hpp"
#include "qtat/stencil.hpp"

using namespace qtat;

namespace {

Medium uniform(const Grid& g, double omega, double n0, double s0) {
  return make_medium(g, Eigen::VectorXd::Constant(g.size(), n0), Eigen::VectorXd::Constant(g.size(), s0), omega);
}

double interior_max(const VectorField& r, int layers = 1) {
  double m = 0.0;
  for (std::size_t p = 0; p < r.nodes(); ++p) {
    const auto [i, j, k] = r.grid.unravel(p);
    if (r.grid.boundary_distance(i, j, k) >= layers) m = std::max(m, r.at(p).cwiseAbs().maxCoeff());
  }
  return m;
}

VectorField field_from(const Grid& g, auto&& f) {
  VectorField E(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto [i, j, k] = g.unravel(p);
    const auto x = g.coord(i, j, k);
    E.set(p, f(x[0], x[1], x[2]));
  }
  return E;
}

// Smooth variable medium: q = w^2 n + i w sigma.
Medium wavy_medium(const Grid& g, double w) {
  Eigen::VectorXd n(g.size()), s(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto [i, j, k] = g.unravel(p);
    const auto x = g.coord(i, j, k);
    n[p] = 1.0 + 0.2 * std::sin(2.0 * x[0] + x[1]) * std::cos(x[2]);
    s[p] = 0.5 + 0.3 * std::cos(x[0] - 2.0 * x[2]) * std::sin(1.5 * x[1] + 0.3);
  }
  return make_medium(g, n, s, w);
}

}  // namespace

TEST_CASE("curl-curl residual of exact plane waves is second order") {
  const Vec3c eta(0, 0, 1);
  const Vec3c zeta(1, 0, 0);
  std::vector<double> res;
  for (int n : {9, 17, 33}) {
    const Grid g = Grid::unit_cube(n);
    const Medium m = uniform(g, 1.0, 1.0, 0.0);
    const VectorField E = plane_wave_field(g, {zeta, eta, 1.0});
    res.push_back(interior_max(apply_curl_curl(m, E)));
  }
  for (std::size_t i = 0; i + 1 < res.size(); ++i) {
    const double ratio = res[i] / res[i + 1];
    CHECK(ratio > 3.4);
    CHECK(ratio < 4.6);
  }

  // oblique, lossy plane wave
  res.clear();
  for (int n : {9, 17, 33}) {
    const Grid g = Grid::unit_cube(n);
    const Medium m = uniform(g, 2.0, 1.0, 1.0);
    const auto pw = plane_wave_params(eval_q(m)[0], Vec3d(1, 2, 2));
    res.push_back(interior_max(apply_curl_curl(m, plane_wave_field(g, pw))));
  }
  for (std::size_t i = 0; i + 1 < res.size(); ++i) {
    const double ratio = res[i] / res[i + 1];
    CHECK(ratio > 3.4);
    CHECK(ratio < 4.6);
  }
}

TEST_CASE("curl-curl trivial inputs") {
  const Grid g = Grid::unit_cube(6);
  const Medium m = uniform(g, 1.5, 1.2, 0.4);
  CHECK(interior_max(apply_curl_curl(m, VectorField(g))) == 0.0);
  const Vec3c c(cplx(1, 2), cplx(-0.5, 0), cplx(0, 3));
  const VectorField E = field_from(g, [&](double, double, double) { return c; });
  const VectorField r = apply_curl_curl(m, E);
  const cplx q = eval_q(m)[0];
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto [i, j, k] = g.unravel(p);
    if (!g.on_boundary(i, j, k)) {
      CHECK((r.at(p) - q * c).norm() < 1e-12);
    }
  }
  CHECK_THROWS_AS(apply_curl_curl(m, VectorField(Grid::unit_cube(7))), GridMismatch);
}

TEST_CASE("discrete -curl curl equals Lap - grad div to machine precision") {
  const Grid g({11, 9, 10}, 0.07);
  const VectorField E = field_from(g, [](double x, double y, double z) {
    return Vec3c(cplx(std::sin(3 * x + y), z * z), cplx(std::exp(x - z), std::cos(2 * y)), cplx(x * y * z, 1.0 / (1 + y)));
  });
  const Eigen::VectorXcd cc = stencil::neg_curl_curl(g, E.values);
  const Eigen::VectorXcd ld = stencil::laplacian3(g, E.values) - stencil::grad_div(g, E.values);
  double scale = 0.0, diff = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto [i, j, k] = g.unravel(p);
    if (g.boundary_distance(i, j, k) < 2) continue;
    scale = std::max(scale, cc.segment<3>(3 * p).cwiseAbs().maxCoeff());
    diff = std::max(diff, (cc - ld).segment<3>(3 * p).cwiseAbs().maxCoeff());
  }
  CHECK(diff <= 1e-12 * scale);
}

TEST_CASE("elliptic form with constant q is Lap + q exactly") {
  const Grid g = Grid::unit_cube(8);
  const Medium m = uniform(g, 2.0, 1.3, 0.9);
  const VectorField E = field_from(g, [](double x, double y, double z) {
    return Vec3c(cplx(std::sin(x + 2 * y), z), cplx(y * y, -x), cplx(std::cos(z - x), x * y));
  });
  const VectorField r = apply_elliptic_form(m, E);
  const cplx q = eval_q(m)[0];
  const Eigen::VectorXcd lap = stencil::laplacian3(g, E.values);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto [i, j, k] = g.unravel(p);
    if (g.on_boundary(i, j, k)) continue;
    for (int a = 0; a < 3; ++a) CHECK(r.values[3 * p + a] == lap[3 * p + a] + q * E.values[3 * p + a]);
  }
  CHECK(interior_max(apply_elliptic_form(m, VectorField(g))) == 0.0);
}

TEST_CASE("elliptic form agrees with curl-curl when div(qE) = 0, up to O(h^2)") {
  // E = curl(A)/q has div(qE) = 0 for any smooth A
  std::vector<double> diffs;
  for (int n : {9, 17, 33}) {
    const Grid g = Grid::unit_cube(n);
    const Medium m = wavy_medium(g, 2.0);
    const Eigen::VectorXcd q = eval_q(m);
    VectorField E(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto [i, j, k] = g.unravel(p);
      const auto x = g.coord(i, j, k);
      // A = (sin(y+z), cos(x z), x^2 y); curl A by hand
      const double cx = x[0] * x[0] - (-x[0] * std::sin(x[0] * x[2]));
      const double cy = std::cos(x[1] + x[2]) - 2 * x[0] * x[1];
      const double cz = -x[2] * std::sin(x[0] * x[2]) - std::cos(x[1] + x[2]);
      E.set(p, Vec3c(cx, cy, cz) / q[p]);
    }
    VectorField d = apply_elliptic_form(m, E);
    d.values -= apply_curl_curl(m, E).values;
    diffs.push_back(interior_max(d));
  }
  for (std::size_t i = 0; i + 1 < diffs.size(); ++i) {
    const double ratio = diffs[i] / diffs[i + 1];
    CHECK(ratio > 3.4);
    CHECK(ratio < 4.6);
  }
}

TEST_CASE("solve_forward reproduces plane waves at second order") {
  std::vector<double> errs;
  for (int n : {9, 17}) {
    const Grid g = Grid::unit_cube(n);
    const Medium m = uniform(g, 4.0, 1.0, 1.0);
    const auto pw = plane_wave_params(eval_q(m)[0], Vec3d(1, 1, 0));
    const VectorField exact = plane_wave_field(g, pw);
    SolveReport rep;
    SolverConfig cfg;
    cfg.tol = 1e-12;
    const VectorField E = solve_forward(m, boundary_trace(exact), cfg, &rep);
    CHECK(rep.relative_residual < 1e-11);
    errs.push_back((E.values - exact.values).norm() / exact.values.norm());
  }
  CHECK(errs[0] < 5e-2);
  CHECK(errs[0] / errs[1] > 3.4);
  CHECK(errs[0] / errs[1] < 4.6);
}

TEST_CASE("solve_forward: zero data, linearity, krylov vs direct") {
  const Grid g = Grid::unit_cube(12);
  const Medium m = wavy_medium(g, 3.0);
  const VectorField Z = solve_forward(m, zero_illumination(g));
  CHECK(Z.values.cwiseAbs().maxCoeff() == 0.0);

  const auto p1 = plane_wave_params(cplx(9.0, 1.0), Vec3d(0, 0, 1));
  const auto p2 = plane_wave_params(cplx(9.0, 1.0), Vec3d(1, 0, 1));
  const auto f1 = boundary_trace(plane_wave_field(g, p1));
  const auto f2 = boundary_trace(plane_wave_field(g, p2));
  SolverConfig kry;
  kry.method = SolverConfig::Method::krylov;
  kry.tol = 1e-10;
  const VectorField e1 = solve_forward(m, f1, kry);
  const VectorField e2 = solve_forward(m, f2, kry);
  const VectorField e12 = solve_forward(m, f1 + cplx(0.0, 2.0) * f2, kry);
  CHECK((e12.values - e1.values - cplx(0.0, 2.0) * e2.values).norm() <= 1e-8 * e12.values.norm());

  SolverConfig dir;
  dir.method = SolverConfig::Method::direct;
  const VectorField d1 = solve_forward(m, f1, dir);
  CHECK((d1.values - e1.values).norm() <= 1e-8 * d1.values.norm());

  // tangential boundary values are imposed exactly
  const BoundaryIllumination back = boundary_trace(d1);
  for (int face = 0; face < 6; ++face)
    CHECK((back.faces[face] - f1.faces[face]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solve_forward rejects unresolved grids and normal boundary data") {
  const Grid g = Grid::unit_cube(6);
  const Medium m = uniform(g, 20.0, 1.0, 0.0);
  CHECK_THROWS_AS(solve_forward(m, zero_illumination(g)), ResolutionError);
  const Medium ok = uniform(g, 1.0, 1.0, 0.0);
  BoundaryIllumination f = zero_illumination(g);
  f.faces[0][0] = 1.0;  // x component on an x face
  CHECK_THROWS_AS(solve_forward(ok, f), ParamError);
}

TEST_CASE("internal data") {
  const Grid g = Grid::unit_cube(5);
  VectorField E(g);
  for (std::size_t p = 0; p < g.size(); ++p) E.set(p, Vec3c(1.0, cplx(0, 1), 0.0));
  CHECK(internal_data(Eigen::VectorXd::Zero(g.size()), E).cwiseAbs().maxCoeff() == 0.0);
  CHECK(internal_data(Eigen::VectorXd::Ones(g.size()), E).isApproxToConstant(2.0));

  const auto pw = plane_wave_params(4.0, Vec3d(0, 1, 0));
  const Eigen::VectorXd H = internal_data(Eigen::VectorXd::Constant(g.size(), 0.7), plane_wave_field(g, pw));
  CHECK((H.array() - 0.7).abs().maxCoeff() < 1e-14);

  VectorField F(g);
  for (Eigen::Index i = 0; i < F.values.size(); ++i) F.values[i] = cplx(std::sin(1.3 * i), std::cos(0.7 * i));
  const Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(g.size(), 0.1, 2.0);
  const Eigen::VectorXd H1 = internal_data(s, F);
  F.values *= std::exp(cplx(0, 0.83));
  CHECK((internal_data(s, F) - H1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(H1.minCoeff() >= 0.0);
  CHECK_THROWS_AS(internal_data(Eigen::VectorXd::Ones(7), F), GridMismatch);
}
