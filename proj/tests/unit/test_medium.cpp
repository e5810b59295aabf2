#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "qtat/errors.hpp"
#include "qtat/io.hpp"
#include "qtat/medium.hpp"

using namespace qtat;

namespace {

Medium uniform(int n, double omega, double n0, double s0) {
  const Grid g = Grid::unit_cube(n);
  return make_medium(g, Eigen::VectorXd::Constant(g.size(), n0), Eigen::VectorXd::Constant(g.size(), s0), omega);
}

}  // namespace

TEST_CASE("eval_q on uniform media") {
  CHECK(eval_q(uniform(4, 1.0, 1.0, 0.0)).isApproxToConstant(cplx(1.0, 0.0)));
  CHECK(eval_q(uniform(4, 1.0, 1.0, 1.0)).isApproxToConstant(cplx(1.0, 1.0)));
  CHECK(eval_q(uniform(4, 2.0, 0.5, 3.0)).isApproxToConstant(cplx(2.0, 6.0)));
}

TEST_CASE("admissibility violations are rejected") {
  const Grid g = Grid::unit_cube(4);
  Eigen::VectorXd n = Eigen::VectorXd::Ones(g.size()), s = Eigen::VectorXd::Zero(g.size());
  n[5] = 0.0;
  CHECK_THROWS_AS(make_medium(g, n, s, 1.0), AdmissibilityError);
  n[5] = 1.0;
  s[7] = -1e-3;
  CHECK_THROWS_AS(make_medium(g, n, s, 1.0), AdmissibilityError);
  s[7] = 0.0;
  n[2] = 5e-7;
  CHECK_THROWS_AS(make_medium(g, n, s, 1.0), AdmissibilityError);
  CHECK_NOTHROW(make_medium(g, n, s, 1.0, 1e-7));
  CHECK_THROWS_AS(Grid({3, 4, 4}, 0.1), ParamError);
}

TEST_CASE("derived fields: transition, hyperbolic and lossless values") {
  auto d = derived_fields(uniform(4, 1.0, 1.0, 1.0));
  CHECK(std::norm(d.q[0]) == doctest::Approx(2.0));
  CHECK(d.kappa[0] == doctest::Approx(0.5));
  CHECK(d.tau_h[0] == doctest::Approx(1.0));

  d = derived_fields(uniform(4, 1.0, 1.0, 2.0));
  CHECK(std::norm(d.q[0]) == doctest::Approx(5.0));
  CHECK(d.kappa[0] == doctest::Approx(0.8));
  CHECK(d.tau_h[0] == doctest::Approx(1.6));

  d = derived_fields(uniform(4, 3.0, 2.0, 0.0));
  CHECK(d.kappa.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.tau_n.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.tau_h.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("derived field identities hold pointwise on a phantom") {
  PhantomParams p;
  p.omega = 3.0;
  p.n_background = 1.2;
  p.sigma_background = 0.7;
  p.bumps = {{{0.4, 0.5, 0.5}, 0.25, 0.3, 0.9}, {{0.65, 0.5, 0.55}, 0.2, -0.2, 0.4}};
  const Medium m = make_phantom(PhantomKind::two_inclusions, Grid::unit_cube(16), p);
  const auto d = derived_fields(m);
  for (Eigen::Index i = 0; i < d.q.size(); ++i) {
    const double w = m.omega;
    CHECK(d.tau_h[i] == 2.0 * d.kappa[i]);
    CHECK(d.kappa[i] * std::norm(d.q[i]) == doctest::Approx(w * w * m.sigma[i] * m.sigma[i]).epsilon(1e-14));
    CHECK(std::norm(d.q[i]) ==
          doctest::Approx(w * w * m.sigma[i] * m.sigma[i] + std::pow(w, 4) * m.n[i] * m.n[i]).epsilon(1e-14));
    CHECK(std::abs(d.q[i]) >= w * w * m.n.minCoeff() * (1 - 1e-15));
    CHECK(d.tau_h[i] >= 0.0);
    CHECK(d.tau_h[i] < 2.0);
  }
}

TEST_CASE("phantoms") {
  const Grid g = Grid::unit_cube(12);
  PhantomParams p;
  p.n_background = 1.0;
  p.sigma_background = 0.5;
  const Medium c = make_phantom(PhantomKind::constant, g, p);
  CHECK(c.n.isApproxToConstant(1.0));
  CHECK(c.sigma.isApproxToConstant(0.5));

  p.bumps = {{{0.5, 0.5, 0.5}, 0.3, 0.0, 0.0}};
  const Medium z = make_phantom(PhantomKind::smooth_bump, g, p);
  CHECK(z.n == c.n);
  CHECK(z.sigma == c.sigma);

  SUBCASE("two overlapping inclusions: values at the centers") {
    const Grid g2({21, 21, 21}, 0.05);
    PhantomParams t;
    t.n_background = 1.0;
    t.sigma_background = 0.2;
    t.bumps = {{{0.4, 0.5, 0.5}, 0.25, 0.3, 0.1}, {{0.6, 0.5, 0.5}, 0.25, 0.5, 0.05}};
    const Medium m = make_phantom(PhantomKind::two_inclusions, g2, t);
    // each center sees its own amplitude plus the other bump at distance 0.2
    const double r = 0.2 / 0.25;
    const double other = std::exp(1.0 - 1.0 / (1.0 - r * r));
    CHECK(m.n[g2.index(8, 10, 10)] == doctest::Approx(1.0 + 0.3 + 0.5 * other).epsilon(1e-13));
    CHECK(m.n[g2.index(12, 10, 10)] == doctest::Approx(1.0 + 0.5 + 0.3 * other).epsilon(1e-13));
    CHECK(m.n.maxCoeff() <= 1.0 + 0.3 + 0.5 + 1e-12);
  }

  SUBCASE("collar stays at background") {
    PhantomParams t = p;
    t.bumps = {{{0.5, 0.5, 0.5}, 0.3, 0.2, 0.3}};
    const Medium m = make_phantom(PhantomKind::smooth_bump, g, t);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto [a, b, cc] = g.unravel(i);
      if (g.boundary_distance(a, b, cc) < 2) {
        CHECK(m.n[i] == 1.0);
        CHECK(m.sigma[i] == 0.5);
      }
    }
  }

  SUBCASE("parameter errors") {
    PhantomParams t = p;
    t.bumps = {{{0.5, 0.5, 0.5}, 0.3, -1.5, 0.0}};
    CHECK_THROWS_AS(make_phantom(PhantomKind::smooth_bump, g, t), ParamError);
    t.bumps = {{{0.5, 0.5, 0.5}, 0.45, 0.1, 0.0}};
    CHECK_THROWS_AS(make_phantom(PhantomKind::smooth_bump, g, t), ParamError);
    t.bumps.clear();
    CHECK_THROWS_AS(make_phantom(PhantomKind::smooth_bump, g, t), ParamError);
  }
}

TEST_CASE("bump profiles") {
  CHECK(bump_profile(BumpProfile::smooth, 0.0) == doctest::Approx(1.0));
  CHECK(bump_profile(BumpProfile::poly3, 0.0) == doctest::Approx(1.0));
  CHECK(bump_profile(BumpProfile::smooth, 1.0) == 0.0);
  CHECK(bump_profile(BumpProfile::poly3, 0.5) == doctest::Approx(0.421875));
  CHECK(bump_profile(BumpProfile::smooth, 0.999) < 1e-200);
}

TEST_CASE("medium and field files round-trip bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "qtat_test_medium_io";
  std::filesystem::remove_all(dir);
  PhantomParams p;
  p.omega = 2.5;
  p.sigma_background = 0.3;
  p.bumps = {{{0.5, 0.5, 0.5}, 0.2, 0.2, 0.3}};
  const Grid g({10, 11, 12}, 0.1, {1.0, -2.0, 0.5});
  p.bumps[0].center = g.center();
  const Medium m = make_phantom(PhantomKind::smooth_bump, g, p);
  write_medium(dir, m);
  const Medium r = read_medium(dir);
  CHECK(r.grid == m.grid);
  CHECK(r.omega == m.omega);
  CHECK(r.n == m.n);
  CHECK(r.sigma == m.sigma);

  VectorField E(m.grid);
  for (Eigen::Index i = 0; i < E.values.size(); ++i) E.values[i] = cplx(std::sin(0.1 * i), std::cos(0.37 * i));
  write_vector_field(dir, "E0", E);
  const VectorField F = read_vector_field(dir, "E0");
  CHECK(F.grid == E.grid);
  CHECK(F.values == E.values);
  CHECK(sha256_file(dir / "n.bin").size() == 64);
  std::filesystem::remove_all(dir);
}
