#include "qtat/medium.hpp"

#include <cmath>
#include <string>

#include "qtat/errors.hpp"

namespace qtat {

void check_admissible(const Medium& m, double n_floor) {
  const auto N = static_cast<Eigen::Index>(m.grid.size());
  if (m.n.size() != N || m.sigma.size() != N) throw GridMismatch("medium fields do not match grid");
  if (!(m.omega > 0.0) || !std::isfinite(m.omega)) throw AdmissibilityError("omega must be positive");
  for (Eigen::Index p = 0; p < N; ++p) {
    if (!std::isfinite(m.n[p]) || m.n[p] < n_floor)
      throw AdmissibilityError("n below floor at node " + std::to_string(p));
    if (!std::isfinite(m.sigma[p]) || m.sigma[p] < 0.0)
      throw AdmissibilityError("sigma negative at node " + std::to_string(p));
  }
}

Medium make_medium(const Grid& grid, Eigen::VectorXd n, Eigen::VectorXd sigma, double omega,
                   double n_floor) {
  Medium m{grid, std::move(n), std::move(sigma), omega};
  check_admissible(m, n_floor);
  return m;
}

Eigen::VectorXcd eval_q(const Medium& m) {
  // q vanishes only if n does, so the strict check suffices
  check_admissible(m, 0.0);
  for (Eigen::Index p = 0; p < m.n.size(); ++p)
    if (m.n[p] <= 0.0) throw AdmissibilityError("n must be positive");
  const double w = m.omega;
  Eigen::VectorXcd q(m.n.size());
  for (Eigen::Index p = 0; p < q.size(); ++p) q[p] = cplx(w * w * m.n[p], w * m.sigma[p]);
  return q;
}

double kappa_of(double omega, double n, double sigma) {
  const double re = omega * omega * n, im = omega * sigma;
  return im * im / (re * re + im * im);
}

double tau_n_of(double omega, double n, double sigma) {
  const double re = omega * omega * n, im = omega * sigma;
  return omega * omega * omega * omega * sigma * n / (re * re + im * im);
}

DerivedFields derived_fields(const Medium& m) {
  DerivedFields d;
  d.q = eval_q(m);
  const auto N = d.q.size();
  d.kappa.resize(N);
  d.tau_n.resize(N);
  d.tau_h.resize(N);
  for (Eigen::Index p = 0; p < N; ++p) {
    d.kappa[p] = kappa_of(m.omega, m.n[p], m.sigma[p]);
    d.tau_n[p] = tau_n_of(m.omega, m.n[p], m.sigma[p]);
    d.tau_h[p] = 2.0 * d.kappa[p];
  }
  return d;
}

double bump_profile(BumpProfile p, double r) {
  if (r >= 1.0) return 0.0;
  const double t = 1.0 - r * r;
  switch (p) {
    case BumpProfile::poly3:
      return t * t * t;
    case BumpProfile::smooth:
      return std::exp(1.0 - 1.0 / t);
    case BumpProfile::gaussian:
      // truncated at r = 1 where it is ~1e-7; fast Fourier decay for spectral work
      return std::exp(-16.0 * r * r);
  }
  return 0.0;
}

namespace {

void check_bump_inside(const Grid& g, const Bump& b, int collar) {
  if (!(b.radius > 0.0)) throw ParamError("bump radius must be positive");
  for (int a = 0; a < 3; ++a) {
    const double lo = g.origin[a] + collar * g.spacing;
    const double hi = g.origin[a] + (g.dims[a] - 1 - collar) * g.spacing;
    if (b.center[a] - b.radius < lo || b.center[a] + b.radius > hi)
      throw ParamError("bump support reaches the boundary collar");
  }
}

}  // namespace

Medium make_phantom(PhantomKind kind, const Grid& grid, const PhantomParams& prm) {
  std::size_t want = 0;
  if (kind == PhantomKind::smooth_bump) want = 1;
  if (kind == PhantomKind::two_inclusions) want = 2;
  if (prm.bumps.size() != want)
    throw ParamError("phantom kind expects " + std::to_string(want) + " bump(s)");
  if (prm.sigma_background < 0.0) throw ParamError("background sigma must be nonnegative");
  if (prm.collar < 0) throw ParamError("collar must be nonnegative");
  for (const auto& b : prm.bumps) check_bump_inside(grid, b, prm.collar);

  const std::size_t N = grid.size();
  Eigen::VectorXd n = Eigen::VectorXd::Constant(N, prm.n_background);
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(N, prm.sigma_background);
  for (const auto& b : prm.bumps) {
    for (std::size_t p = 0; p < N; ++p) {
      const auto [i, j, k] = grid.unravel(p);
      const auto x = grid.coord(i, j, k);
      const double r = std::sqrt((x[0] - b.center[0]) * (x[0] - b.center[0]) +
                                 (x[1] - b.center[1]) * (x[1] - b.center[1]) +
                                 (x[2] - b.center[2]) * (x[2] - b.center[2])) /
                       b.radius;
      const double v = bump_profile(prm.profile, r);
      n[p] += b.dn * v;
      sigma[p] += b.dsigma * v;
    }
  }
  if (n.minCoeff() < prm.n_floor) throw ParamError("bump amplitude drives n below the floor");
  if (sigma.minCoeff() < 0.0) throw ParamError("bump amplitude drives sigma negative");
  return make_medium(grid, std::move(n), std::move(sigma), prm.omega, prm.n_floor);
}

PhantomKind parse_phantom_kind(const std::string& s) {
  if (s == "constant") return PhantomKind::constant;
  if (s == "smooth_bump") return PhantomKind::smooth_bump;
  if (s == "two_inclusions") return PhantomKind::two_inclusions;
  throw ConfigError("unknown phantom kind: " + s);
}

BumpProfile parse_bump_profile(const std::string& s) {
  if (s == "smooth") return BumpProfile::smooth;
  if (s == "poly3") return BumpProfile::poly3;
  if (s == "gaussian") return BumpProfile::gaussian;
  throw ConfigError("unknown bump profile: " + s);
}

}  // namespace qtat
