#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qtat/cgo.hpp"
#include "qtat/errors.hpp"
#include "qtat/symbols.hpp"

using namespace qtat;

namespace {

Medium gaussian_medium(int N, double omega, double dn, double dsigma, double radius) {
  const Grid g = Grid::unit_cube(N);
  PhantomParams pp;
  pp.omega = omega;
  pp.n_background = 1.0;
  pp.sigma_background = 0.0;
  pp.profile = BumpProfile::gaussian;
  const auto c = g.center();
  pp.bumps = {Bump{{c[0], c[1], c[2]}, radius, dn, dsigma}};
  return make_phantom(PhantomKind::smooth_bump, g, pp);
}

Vec3d rel(const CgoBox& b, std::size_t i) { return b.coord(i) - b.center(); }

double l2(const Eigen::VectorXcd& v) { return v.norm(); }

}  // namespace

TEST_CASE("FFT box: round trip, derivatives, shifted lattice") {
  const FftBox F({8, 10, 12}, 0.1);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N;
  Eigen::VectorXcd f(F.size());
  for (auto& v : f) v = cplx(N(rng), N(rng));
  for (int sh : {FftBox::kPeriodic, 0, 2}) {
    Eigen::VectorXcd g = f;
    F.forward(g, sh);
    F.inverse(g, sh);
    CHECK((g - f).norm() < 1e-13 * f.norm());
  }
  // d/dy of sin(2 pi y / L) and of the antiperiodic exp(i 3 pi y / L)
  const double Ly = F.length(1);
  Eigen::VectorXcd s(F.size()), a(F.size()), ds(F.size()), da(F.size());
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 12; ++k) {
        const double y = j * F.h(), w = 2 * std::numbers::pi / Ly;
        const auto idx = F.index(i, j, k);
        s[idx] = std::sin(w * y);
        ds[idx] = w * std::cos(w * y);
        a[idx] = std::exp(cplx(0, 1.5 * w * y));
        da[idx] = cplx(0, 1.5 * w) * a[idx];
      }
  CHECK((F.derivative(s, 1, FftBox::kPeriodic) - ds).norm() < 1e-12 * ds.norm());
  CHECK((F.derivative(a, 1, 1) - da).norm() < 1e-12 * da.norm());
  CHECK(F.freq(1, 0, 1) == doctest::Approx(std::numbers::pi / Ly));
  CHECK(F.freq(1, 9, FftBox::kPeriodic) == doctest::Approx(-2 * std::numbers::pi / Ly));
}

TEST_CASE("CGO box geometry") {
  const Grid g = Grid::unit_cube(17);
  const CgoBox b = make_cgo_box(g);
  CHECK(b.fft->dims() == std::array<int, 3>{32, 32, 32});
  for (std::size_t p : {std::size_t(0), g.size() - 1, g.size() / 2}) {
    const auto [i, j, k] = g.unravel(p);
    const auto x = g.coord(i, j, k);
    CHECK((b.coord(b.box_index(p)) - Vec3d(x[0], x[1], x[2])).norm() < 1e-14);
  }
  Eigen::VectorXcd v = Eigen::VectorXcd::LinSpaced(g.size(), 0.0, 1.0);
  CHECK((restrict_to_grid(b, embed(b, v, 3.0)) - v).norm() == 0.0);
}

TEST_CASE("Faddeev kernel: single modes, zero, inverse, resonance") {
  const FftBox F({16, 16, 16}, 1.0 / 8);
  const auto p = cgo_params(3.0, Vec3d(0, 0, 1), Vec3d(1, 0, 0), 2.0);
  const int sh = resonance_axis(p.zeta);
  CHECK(sh == 2);
  const auto G = faddeev_kernel(F, p.zeta, sh);
  CHECK(G.min_denom > G.denom_floor);

  // exact on a lattice mode
  const Vec3d x0(2 * 2 * std::numbers::pi / 2.0, -1 * 2 * std::numbers::pi / 2.0, 1.5 * 2 * std::numbers::pi / 2.0);
  Eigen::VectorXcd f(F.size());
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      for (int k = 0; k < 16; ++k) f[F.index(i, j, k)] = std::exp(cplx(0, x0.dot(Vec3d(i, j, k) / 8.0)));
  const cplx d = x0.squaredNorm() + 2.0 * bdot(p.zeta, x0);
  CHECK((faddeev_apply(F, G, f) - f / d).norm() < 1e-12 * f.norm() / std::abs(d));
  CHECK(faddeev_apply(F, G, Eigen::VectorXcd::Zero(F.size())).norm() == 0.0);

  // -(Delta + 2 i zeta.grad) G f = f for a smooth compact f
  const FftBox F2({32, 32, 32}, 1.0 / 8);
  const auto G2 = faddeev_kernel(F2, p.zeta, sh);
  Eigen::VectorXcd b(F2.size());
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      for (int k = 0; k < 32; ++k) {
        const Vec3d x = Vec3d(i, j, k) / 8.0 - Vec3d(2, 2, 2);
        b[F2.index(i, j, k)] = std::exp(-6.0 * x.squaredNorm()) * cplx(1.0, x[0]);
      }
  const Eigen::VectorXcd u = faddeev_apply(F2, G2, b);
  Eigen::VectorXcd Lu = -F2.laplacian(u, sh);
  for (int c = 0; c < 3; ++c) Lu -= 2.0 * cplx(0, 1) * p.zeta[c] * F2.derivative(u, c, sh);
  CHECK((Lu - b).norm() < 1e-10 * b.norm());

  // linear, and commutes with the <xi>^l weight
  Eigen::VectorXcd wb = b;
  F2.forward(wb, sh);
  for (std::size_t i = 0; i < F2.size(); ++i) wb[i] *= std::pow(1.0 + F2.xi(i, sh).squaredNorm(), 0.75);
  F2.inverse(wb, sh);
  Eigen::VectorXcd wu = u;
  F2.forward(wu, sh);
  for (std::size_t i = 0; i < F2.size(); ++i) wu[i] *= std::pow(1.0 + F2.xi(i, sh).squaredNorm(), 0.75);
  F2.inverse(wu, sh);
  CHECK((faddeev_apply(F2, G2, wb) - wu).norm() < 1e-11 * wu.norm());
  const Eigen::VectorXcd b2 = b.cwiseProduct(b);
  CHECK((faddeev_apply(F2, G2, 2.0 * b + b2) - 2.0 * u - faddeev_apply(F2, G2, b2)).norm() < 1e-12 * u.norm());

  // the unshifted lattice contains xi = 0
  CHECK_THROWS_AS(faddeev_kernel(F, p.zeta, FftBox::kPeriodic), ResonanceError);
}

TEST_CASE("Faddeev norm decay ~ 1/|zeta|") {
  const FftBox F({32, 32, 32}, 1.0 / 16);
  Eigen::VectorXcd b(F.size());
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      for (int k = 0; k < 32; ++k) {
        const Vec3d x = Vec3d(i, j, k) / 16.0 - Vec3d(1, 1, 1);
        b[F.index(i, j, k)] = std::exp(-16.0 * x.squaredNorm());
      }
  std::vector<double> z, n, scaled;
  for (double s : {8.0, 16.0, 32.0, 64.0}) {
    const auto p = cgo_params(s * 3, Vec3d(0, 0, 1), Vec3d(0, 1, 0), 2.0);
    const auto G = faddeev_kernel(F, p.zeta, resonance_axis(p.zeta));
    z.push_back(p.zeta.norm());
    n.push_back(l2(faddeev_apply(F, G, b)));
    scaled.push_back(n.back() * z.back() / l2(b));
  }
  const double slope = loglog_slope(z, n);
  MESSAGE("Faddeev slope " << slope);
  CHECK(slope >= -1.25);
  CHECK(slope <= -0.75);
  CHECK(*std::max_element(scaled.begin(), scaled.end()) / *std::min_element(scaled.begin(), scaled.end()) < 2.0);
}

TEST_CASE("alpha and frak_q for gamma0 = exp(g)") {
  // sigma = 0, n = exp(g): gamma0 = exp(g) real
  const int Nn = 25;
  const Grid g = Grid::unit_cube(Nn);
  const auto c = g.center();
  Eigen::VectorXd n(g.size()), sigma = Eigen::VectorXd::Zero(g.size());
  const double amp = 0.3, w2 = 0.012;
  const auto gfun = [&](const Vec3d& x) {
    const double r2 = (x - Vec3d(c[0], c[1], c[2])).squaredNorm();
    return r2 < 0.4 * 0.4 ? amp * std::exp(-r2 / w2) : 0.0;
  };
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto [i, j, k] = g.unravel(p);
    const auto x = g.coord(i, j, k);
    n[p] = std::exp(gfun(Vec3d(x[0], x[1], x[2])));
  }
  const Medium m = make_medium(g, n, sigma, 1.7);
  const CgoBox b = make_cgo_box(g);
  const AlphaQ aq = build_alpha_q(m, b);
  CHECK(aq.k == doctest::Approx(1.7));

  const auto errors = [&](const AlphaQ& a) {
    double ea = 0, na = 0, eq = 0, nq = 0;
    for (std::size_t i = 0; i < b.fft->size(); ++i) {
      const Vec3d d = rel(b, i);
      const double gv = gfun(b.coord(i));
      const Vec3d dg = -2.0 / w2 * gv * d;
      const double lap = gv * (4.0 * d.squaredNorm() / (w2 * w2) - 6.0 / w2);
      const double q = 0.25 * dg.squaredNorm() + 0.5 * lap;
      for (int cc = 0; cc < 3; ++cc) {
        ea += std::norm(a.alpha[cc][i] - dg[cc]);
        na += dg[cc] * dg[cc];
      }
      eq += std::norm(a.frak_q[i] - q);
      nq += q * q;
    }
    return std::pair{std::sqrt(ea / na), std::sqrt(eq / nq)};
  };
  const auto [sa, sq] = errors(aq);
  MESSAGE("spectral alpha/q errors " << sa << " " << sq);
  CHECK(sa < 5e-4);
  CHECK(sq < 1e-3);

  // centered differences converge at second order
  std::vector<double> errs;
  for (int Nc : {17, 33}) {
    const Grid gc = Grid::unit_cube(Nc);
    Eigen::VectorXd nc(gc.size());
    for (std::size_t p = 0; p < gc.size(); ++p) {
      const auto [i, j, k] = gc.unravel(p);
      const auto x = gc.coord(i, j, k);
      nc[p] = std::exp(gfun(Vec3d(x[0], x[1], x[2])));
    }
    const CgoBox bc = make_cgo_box(gc);
    const AlphaQ ac = build_alpha_q(make_medium(gc, nc, Eigen::VectorXd::Zero(gc.size()), 1.7), bc,
                                    Differentiation::centered);
    double e = 0, nn = 0;
    for (std::size_t i = 0; i < bc.fft->size(); ++i) {
      const Vec3d d = rel(bc, i);
      const Vec3d dg = -2.0 / w2 * gfun(bc.coord(i)) * d;
      for (int cc = 0; cc < 3; ++cc) {
        e += std::norm(ac.alpha[cc][i] - dg[cc]);
        nn += dg[cc] * dg[cc];
      }
    }
    errs.push_back(std::sqrt(e / nn));
  }
  MESSAGE("centered alpha errors " << errs[0] << " " << errs[1]);
  CHECK(errs[0] / errs[1] > 3.4);
  CHECK(errs[0] / errs[1] < 4.6);

  // constant medium: alpha = 0, q = 0
  const Medium m0 = make_medium(g, Eigen::VectorXd::Constant(g.size(), 1.3), sigma, 2.0);
  const AlphaQ a0 = build_alpha_q(m0, b);
  for (int cc = 0; cc < 3; ++cc) CHECK(a0.alpha[cc].norm() < 1e-11);
  CHECK(a0.frak_q.norm() < 1e-10);
  CHECK(a0.k == doctest::Approx(2.0 * std::sqrt(1.3)));

  // lossy collar is not compactly supported
  const Medium lossy = make_medium(g, Eigen::VectorXd::Ones(g.size()), Eigen::VectorXd::Constant(g.size(), 0.1), 2.0);
  CHECK_THROWS_AS(build_alpha_q(lossy, b), SupportError);
}

TEST_CASE("CGO: constant medium gives the plane wave") {
  const Grid g = Grid::unit_cube(9);
  const Medium m = make_medium(g, Eigen::VectorXd::Ones(g.size()), Eigen::VectorXd::Zero(g.size()), 2.0);
  const auto p = cgo_params(5.0, Vec3d(0, 0, 1), Vec3d(1, 0, 0), 2.0);
  CgoOptions opt;
  const CgoSolution sol = cgo_solve(m, p, opt);
  for (int c = 0; c < 3; ++c) CHECK(sol.rq.R[c].norm() == 0.0);
  const Vec3c far = cplx(0, 1) * cross(p.zeta, p.eta_zeta);
  for (int c = 0; c < 3; ++c) CHECK((sol.rq.Q[c].array() - far[c]).matrix().norm() == 0.0);
  opt.far_field_q = false;
  const auto rq = neumann_series_RQ(m, p, opt);
  for (int c = 0; c < 3; ++c) CHECK(rq.Q[c].norm() == 0.0);

  const auto gc = g.center();
  const PlaneWaveParams pw{p.zeta, p.eta_zeta, 4.0};
  const VectorField ref = plane_wave_field(g, pw, Vec3d(gc[0], gc[1], gc[2]));
  CHECK((sol.E.values - ref.values).norm() < 1e-13 * ref.values.norm());
  CHECK(cgo_residual(sol) < 1e-13);

  const auto bad = cgo_params(5.0, Vec3d(0, 0, 1), Vec3d(1, 0, 0), 3.0);
  CHECK_THROWS_AS(cgo_solve(m, bad), ParamError);
}

TEST_CASE("CGO on a Gaussian bump: residual, Q consistency, decay") {
  const Medium m = gaussian_medium(21, 6.0, 0.3, 0.5, 0.39);
  const double k = 6.0;
  const auto p = cgo_params(4.0 * (1 + k), Vec3d(0, 0, 1), Vec3d(1, 0, 0), k);
  CgoOptions opt;
  const CgoSolution sol = cgo_solve(m, p, opt);
  CHECK(sol.rq.tail_norm < opt.tol);
  for (std::size_t i = 1; i < sol.rq.term_norms.size(); ++i)
    CHECK(sol.rq.term_norms[i] < sol.rq.term_norms[i - 1]);
  const double res = cgo_residual(sol), qc = cgo_q_consistency(sol);
  MESSAGE("residual " << res << " Q consistency " << qc);
  CHECK(res < 2e-3);
  CHECK(qc < 2e-3);
  CHECK(sol.min_abs_E > 0.0);

  // the literal form of the sources violates Q = d~(eta^ + R^)
  opt.far_field_q = false;
  const CgoSolution lit = cgo_solve(m, p, opt);
  CHECK(cgo_q_consistency(lit) > 1.0);
  CHECK(cgo_residual(lit) > 3.0 * res);

  const auto st = decay_study(m, Vec3d(0, 0, 1), Vec3d(1, 0, 0), {4.0 * (1 + k), 8.0 * (1 + k), 16.0 * (1 + k)});
  double lo = 1e300, hi = 0;
  for (const auto& r : st.rows) {
    lo = std::min(lo, r.scaled);
    hi = std::max(hi, r.scaled);
  }
  MESSAGE("decay slope " << st.slope);
  CHECK(st.slope >= -1.25);
  CHECK(st.slope <= -0.75);
  CHECK(hi / lo < 2.0);
}

TEST_CASE("CGO field: asymptotics and direction stabilization") {
  const Medium m = gaussian_medium(17, 2.0, 0.3, 0.5, 0.37);
  const double k = 2.0, s = 32.0 * (1 + k);
  const Vec3d rho(0, 0, 1), rp(0, 1, 0);
  const auto p = cgo_params(s, rho, rp, k);
  const CgoSolution sol = cgo_solve(m, p);
  const Grid& g = m.grid;
  const auto gc = g.center();
  const Vec3d x0(gc[0], gc[1], gc[2]);
  const auto xis = fibonacci_sphere(256);
  double rmin = 1e300, rmax = 0, dmax = 0;
  for (std::size_t node = 0; node < g.size(); ++node) {
    const auto [i, j, kk] = g.unravel(node);
    const auto x = g.coord(i, j, kk);
    const Vec3d xr = Vec3d(x[0], x[1], x[2]) - x0;
    const cplx q = cplx(4.0 * m.n[node], 2.0 * m.sigma[node]) / (k * k);
    const double asym = std::pow(std::abs(q), -0.5) * std::exp(s * xr.dot(rho)) * std::sqrt(2.0) * s;
    const Vec3c E = sol.E.at(node);
    rmin = std::min(rmin, E.norm() / asym);
    rmax = std::max(rmax, E.norm() / asym);
    const Vec3c Eh = E / E.norm();
    for (const auto& xi : xis) dmax = std::max(dmax, std::abs(std::abs(bdot(Eh, xi)) - std::abs(bdot(p.zeta_inf, xi))));
  }
  MESSAGE("asymptote ratio in [" << rmin << ", " << rmax << "], direction gap " << dmax);
  CHECK(rmin >= 0.8);
  CHECK(rmax <= 1.2);
  CHECK(dmax <= 0.05);
}

TEST_CASE("CGO: series diverges for a strong contrast at small s") {
  const Medium m = gaussian_medium(17, 1.0, 40.0, 0.0, 0.37);
  const auto p = cgo_params(0.1, Vec3d(0, 0, 1), Vec3d(1, 0, 0), 1.0);
  CHECK_THROWS_AS(cgo_solve(m, p), NoContraction);
}

TEST_CASE("log-log slope") {
  CHECK(loglog_slope({1, 2, 4}, {1, 0.5, 0.25}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(loglog_slope({1}, {1}), ParamError);
}
