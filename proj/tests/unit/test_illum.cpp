#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qtat/errors.hpp"
#include "qtat/illum.hpp"

using namespace qtat;

namespace {



}  // namespace

TEST_CASE("plane wave parameters: worked cases") {
  auto p = plane_wave_params(1.0, Vec3d(0, 0, 1));
  CHECK((p.zeta - Vec3c(1, 0, 0)).norm() < 1e-15);
  CHECK(std::abs(bdot(p.zeta, p.zeta) - 1.0) < 1e-15);
  CHECK(std::abs(bdot(p.zeta, p.eta)) < 1e-15);

  // a^2 - b^2 = 1, 2ab = 1  =>  a^4 - a^2 - 1/4 = 0
  const double a2 = (1.0 + std::sqrt(1.0 + 1.0)) / 2.0;
  const double a = std::sqrt(a2), b = 1.0 / (2.0 * a);
  CHECK(a == doctest::Approx(1.09868).epsilon(1e-5));
  CHECK(b == doctest::Approx(0.45509).epsilon(1e-5));
  p = plane_wave_params(cplx(1, 1), Vec3d(0, 0, 1));
  CHECK(p.zeta.real().norm() == doctest::Approx(a).epsilon(1e-14));
  CHECK(p.zeta.imag().norm() == doctest::Approx(b).epsilon(1e-14));
  CHECK(std::abs(bdot(p.zeta, p.zeta) - cplx(1, 1)) < 1e-14);

  p = plane_wave_params(-4.0, Vec3d(0, 0, 1));
  CHECK(p.zeta.real().norm() < 1e-15);
  CHECK(p.zeta.imag().norm() == doctest::Approx(2.0));
  CHECK(std::abs(bdot(p.zeta, p.zeta) + 4.0) < 1e-14);

  CHECK_THROWS_AS(plane_wave_params(1.0, Vec3d(0, 0, 1e-14)), DegenerateInput);
  CHECK_THROWS_AS(plane_wave_params(0.0, Vec3d(0, 0, 1)), DegenerateInput);
}

TEST_CASE("plane wave constraints over a q0 sweep") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int il = 0; il <= 8; ++il)
    for (int ia = 0; ia <= 8; ++ia) {
      const double r = std::pow(10.0, -2.0 + 4.0 * il / 8.0);
      const double th = 0.5 * std::numbers::pi * ia / 8.0;
      const cplx q0 = std::polar(r, th);
      const Vec3d eta(nd(rng), nd(rng), nd(rng));
      const auto p = plane_wave_params(q0, eta);
      CHECK(std::abs(bdot(p.zeta, p.zeta) - q0) <= 1e-12 * std::abs(q0));
      CHECK(std::abs(bdot(p.zeta, p.eta)) <= 1e-12 * p.zeta.norm());
      CHECK(std::abs(p.zeta.real().dot(eta.normalized())) <= 1e-12 * p.zeta.norm());
      CHECK(std::abs(p.zeta.imag().dot(eta.normalized())) <= 1e-12 * p.zeta.norm());
      const double re2 = p.zeta.real().squaredNorm(), im2 = p.zeta.imag().squaredNorm();
      CHECK(re2 - im2 == doctest::Approx(q0.real()).epsilon(1e-12).scale(std::abs(q0)));
      CHECK(2.0 * p.zeta.real().dot(p.zeta.imag()) == doctest::Approx(q0.imag()).epsilon(1e-12).scale(std::abs(q0)));
    }
}

TEST_CASE("CGO parameters") {
  const Vec3d e1(1, 0, 0), e2(0, 1, 0), e3(0, 0, 1);
  auto c = cgo_params(1.0, e1, e2, 1.0, Vec3c(e3.cast<cplx>()), Vec3c::Zero());
  CHECK((c.zeta - Vec3c(cplx(0, -1), std::sqrt(2.0), 0)).norm() < 1e-15);
  CHECK(std::abs(bdot(c.zeta, c.zeta) - 1.0) < 1e-14);
  CHECK((c.eta_zeta - e3.cast<cplx>() / std::sqrt(3.0)).norm() < 1e-15);
  CHECK(std::abs(bdot(c.zeta, c.eta_zeta)) < 1e-15);

  CHECK_THROWS_AS(cgo_params(1.0, e1, Vec3d(0.1, 1, 0).normalized(), 1.0), OrthogonalityError);
  CHECK_THROWS_AS(cgo_params(-1.0, e1, e2, 1.0), ParamError);

  std::vector<double> ratios;
  for (double s : {10.0, 100.0, 1000.0}) {
    c = cgo_params(s, e3, e1, 2.0);
    CHECK(c.zeta.squaredNorm() == doctest::Approx(2 * s * s + 4.0).epsilon(1e-14));
    CHECK(std::abs(bdot(c.zeta, c.zeta) - 4.0) <= 1e-12 * c.zeta.squaredNorm());
    CHECK(std::abs(bdot(c.zeta, c.eta_zeta)) <= 1e-12 * c.zeta.squaredNorm());
    CHECK(std::abs(bdot(c.zeta_inf, c.a_vec) - 1.0) < 1e-15);
    ratios.push_back((c.eta_zeta + c.zeta).norm() / s);
  }
  CHECK(ratios[1] < ratios[0]);
  CHECK(ratios[2] < ratios[1]);
  CHECK(ratios[2] < 1e-3);
}

TEST_CASE("direction family") {
  const auto f = direction_family(3);
  REQUIRE(f.pairs.size() == 4);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(f.pairs[0].rho.isApprox(Eigen::Vector3d(0, 0, 1)));
  CHECK(f.pairs[0].rho_perp.isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(f.pairs[1].rho_perp.isApprox(Eigen::Vector3d(0, 1, 0)));
  CHECK(f.pairs[2].rho_perp.isApprox(Eigen::Vector3d(r, r, 0)));
  CHECK(f.pairs[3].rho.isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(f.pairs[3].rho_perp.isApprox(Eigen::Vector3d(0, r, r)));
  for (int n : {3, 4, 6}) {
    const auto g = direction_family(n);
    CHECK(g.pairs.size() == static_cast<std::size_t>(n + 1));
    for (const auto& p : g.pairs) {
      CHECK(p.rho.size() == n);
      CHECK(std::abs(p.rho.norm() - 1.0) < 1e-15);
      CHECK(std::abs(p.rho_perp.norm() - 1.0) < 1e-15);
      CHECK(std::abs(p.rho.dot(p.rho_perp)) < 1e-15);
    }
    for (int j = 0; j < n; ++j) {
      CHECK(g.pairs[j].rho == Eigen::VectorXd::Unit(n, n - 1));
      CHECK(std::abs(g.pairs[j].rho_perp[n - 1]) == 0.0);
      for (int l = 0; l < j; ++l) CHECK((g.pairs[j].rho_perp - g.pairs[l].rho_perp).norm() > 0.1);
    }
  }
  CHECK_THROWS_AS(direction_family(2), DimensionError);
}

TEST_CASE("limit directions of the family separate every xi") {
  const auto f = direction_family(3);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  double worst = 1e300;
  for (int s = 0; s < 10000; ++s) {
    Eigen::Vector3d xi(nd(rng), nd(rng), nd(rng));
    xi.normalize();
    std::vector<double> v;
    for (const auto& p : f.pairs) {
      const double a = xi.dot(p.rho), b = xi.dot(p.rho_perp);
      v.push_back(std::sqrt(0.5 * (a * a + b * b)));
    }
    double gap = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j)
      for (std::size_t l = j + 1; l < v.size(); ++l) gap = std::max(gap, std::abs(v[j] - v[l]));
    worst = std::min(worst, gap);
  }
  CHECK(worst > 1e-2);
}

TEST_CASE("boundary traces") {
  const Grid g = Grid::unit_cube(5);
  VectorField E(g);
  for (std::size_t p = 0; p < g.size(); ++p) E.set(p, Vec3c(0, 0, 1));
  auto f = boundary_trace(E);
  CHECK(f.faces[5].cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.faces[4].cwiseAbs().maxCoeff() == 0.0);

  for (std::size_t p = 0; p < g.size(); ++p) E.set(p, Vec3c(1, 0, 0));
  f = boundary_trace(E);
  for (int u = 0; u < 5; ++u)
    for (int v = 0; v < 5; ++v) {
      CHECK((f.value(5, u, v) - Vec3c(0, 1, 0)).norm() == 0.0);
      CHECK((f.value(4, u, v) - Vec3c(0, -1, 0)).norm() == 0.0);
      CHECK((f.tangential(5, u, v) - Vec3c(1, 0, 0)).norm() == 0.0);
    }
  CHECK_NOTHROW(check_tangent(f, 0.0));

  for (Eigen::Index i = 0; i < E.values.size(); ++i) E.values[i] = cplx(std::cos(0.3 * i), std::sin(1.1 * i));
  f = boundary_trace(E);
  CHECK_NOTHROW(check_tangent(f, 0.0));
  for (int face = 0; face < 6; ++face)
    for (Eigen::Index s = 0; s < f.faces[face].size() / 3; ++s) CHECK(f.faces[face][3 * s + face / 2] == 0.0);
}

TEST_CASE("plane wave trace regenerates the plane wave") {
  std::vector<double> errs;
  for (int n : {9, 17}) {
    const Grid g = Grid::unit_cube(n);
    const auto fam = plane_wave_family(cplx(9.0, 2.0), direction_family(3));
    const Medium m = make_medium(g, Eigen::VectorXd::Constant(g.size(), 1.0),
                                 Eigen::VectorXd::Constant(g.size(), 2.0 / 3.0), 3.0);
    const VectorField exact = plane_wave_field(g, fam[3]);
    const VectorField E = solve_forward(m, boundary_trace(exact));
    errs.push_back((E.values - exact.values).norm() / exact.values.norm());
  }
  CHECK(errs[1] < 5e-3);
  CHECK(errs[0] / errs[1] > 3.4);
}

TEST_CASE("s selection doubles from 10(1+k)") {
  std::vector<double> seen;
  const double s = select_s(1.0, [&](double t) {
    seen.push_back(t);
    return t >= 70.0;
  });
  CHECK(s == 80.0);
  CHECK(seen == std::vector<double>{20.0, 40.0, 80.0});
  CHECK_THROWS_AS(select_s(1.0, [](double) { return false; }, 2), NoContraction);
}
