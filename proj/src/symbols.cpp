#include "qtat/symbols.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qtat/errors.hpp"

namespace qtat {

AB ab_symbols(const Vec3c& E, double kappa, double tau_n, const Vec3d& xi) {
  const double e2 = std::norm(bdot(E, xi));
  return {-E.squaredNorm() * xi.squaredNorm() + 2.0 * kappa * e2, 2.0 * tau_n * e2};
}

Eigen::MatrixXcd a12_symbol(const std::vector<Vec3c>& E, cplx q0, double omega, const Vec3d& xi) {
  if (q0 == cplx(0.0)) throw DivisionByZero("q0 must be nonzero");
  const cplx I(0.0, 1.0);
  const std::size_t J = E.size();
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(6 * J, 2);
  const Vec3c xc = xi.cast<cplx>();
  for (std::size_t j = 0; j < J; ++j) {
    const cplx d = bdot(E[j], xi);
    const cplx dc = bdot(Vec3c(E[j].conjugate()), xi);
    A.block<3, 1>(6 * j, 0) = -(I * omega / q0) * d * xc;
    A.block<3, 1>(6 * j, 1) = -(omega * omega / q0) * d * xc;
    A.block<3, 1>(6 * j + 3, 0) = (I * omega / std::conj(q0)) * dc * xc;
    A.block<3, 1>(6 * j + 3, 1) = -(omega * omega / std::conj(q0)) * dc * xc;
  }
  return A;
}

namespace {

// sigma_min from the 2x2 Gram matrix [g11 g12; g12 g22] with det supplied
// separately (sum of squared minors).
double sigma_min_from(double g11, double g22, double det) {
  const double tr = g11 + g22;
  if (tr <= 0.0) return 0.0;
  det = std::max(det, 0.0);
  const double disc = std::max(tr * tr - 4.0 * det, 0.0);
  const double lmax = 0.5 * (tr + std::sqrt(disc));
  return std::sqrt(det / lmax);
}

}  // namespace

double sigma_min_2col(const Eigen::MatrixX2d& A) {
  double g11 = 0, g22 = 0, det = 0;
  for (Eigen::Index j = 0; j < A.rows(); ++j) {
    g11 += A(j, 0) * A(j, 0);
    g22 += A(j, 1) * A(j, 1);
    for (Eigen::Index l = j + 1; l < A.rows(); ++l) {
      const double mnr = A(j, 0) * A(l, 1) - A(l, 0) * A(j, 1);
      det += mnr * mnr;
    }
  }
  return sigma_min_from(g11, g22, det);
}

SymbolSample assemble_symbol(const std::vector<Vec3c>& E, cplx q0, double omega, double kappa, double tau_n,
                             const Vec3d& xi, double rank_rel_tol) {
  const auto J = static_cast<Eigen::Index>(E.size());
  SymbolSample s;
  s.xi = xi;
  s.A22.resize(J, 2);
  for (Eigen::Index j = 0; j < J; ++j) {
    const AB ab = ab_symbols(E[j], kappa, tau_n, xi);
    s.A22(j, 0) = ab.a;
    s.A22(j, 1) = ab.b;
  }
  s.A0 = Eigen::MatrixXcd::Zero(6 * J + J, 6 * J + 2);
  s.A0.topLeftCorner(6 * J, 6 * J) = -xi.squaredNorm() * Eigen::MatrixXcd::Identity(6 * J, 6 * J);
  s.A0.topRightCorner(6 * J, 2) = a12_symbol(E, q0, omega, xi);
  s.A0.bottomRightCorner(J, 2) = s.A22.cast<cplx>();
  s.sigma_min = sigma_min_2col(s.A22);
  s.max_row_norm = J > 0 ? s.A22.rowwise().norm().maxCoeff() : 0.0;
  s.rank_tol = rank_rel_tol * s.max_row_norm;
  s.rank_ok = s.sigma_min > s.rank_tol;
  return s;
}

std::vector<Vec3d> fibonacci_sphere(int n) {
  if (n < 1) throw ParamError("need at least one sphere sample");
  std::vector<Vec3d> pts(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts[i] = Vec3d(r * std::cos(phi), r * std::sin(phi), z);
  }
  return pts;
}

namespace {

struct PointData {
  std::vector<Vec3c> E;
  std::vector<double> E2;
  double kappa, tau_n;
};

// Relative margin sigma_min / max row norm at one (x, xi).
double margin_at(const PointData& d, const Vec3d& xi, double* sigma_out = nullptr) {
  const std::size_t J = d.E.size();
  double a[64], b[64];
  double g11 = 0, g22 = 0, rmax = 0, det = 0;
  const double x2 = xi.squaredNorm();
  for (std::size_t j = 0; j < J; ++j) {
    const double e2 = std::norm(bdot(d.E[j], xi));
    a[j] = -d.E2[j] * x2 + 2.0 * d.kappa * e2;
    b[j] = 2.0 * d.tau_n * e2;
    g11 += a[j] * a[j];
    g22 += b[j] * b[j];
    rmax = std::max(rmax, a[j] * a[j] + b[j] * b[j]);
  }
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t l = j + 1; l < J; ++l) {
      const double mnr = a[j] * b[l] - a[l] * b[j];
      det += mnr * mnr;
    }
  const double smin = sigma_min_from(g11, g22, det);
  if (sigma_out) *sigma_out = smin;
  return rmax > 0 ? smin / std::sqrt(rmax) : 0.0;
}

// Nelder-Mead over the tangent plane of the sphere at xi0.
Vec3d refine_on_sphere(const PointData& d, const Vec3d& xi0, double step) {
  Vec3d t1 = (std::abs(xi0[0]) < 0.9 ? Vec3d::UnitX() : Vec3d::UnitY());
  t1 = (t1 - t1.dot(xi0) * xi0).normalized();
  const Vec3d t2 = xi0.cross(t1);
  const auto map = [&](const Eigen::Vector2d& u) { return Vec3d(xi0 + u[0] * t1 + u[1] * t2).normalized(); };
  const auto f = [&](const Eigen::Vector2d& u) { return margin_at(d, map(u)); };
  std::array<Eigen::Vector2d, 3> s = {Eigen::Vector2d(0, 0), Eigen::Vector2d(step, 0), Eigen::Vector2d(0, step)};
  std::array<double, 3> fv = {f(s[0]), f(s[1]), f(s[2])};
  for (int it = 0; it < 400; ++it) {
    std::array<int, 3> o = {0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int x, int y) { return fv[x] < fv[y]; });
    const int best = o[0], mid = o[1], worst = o[2];
    if ((s[worst] - s[best]).norm() < 1e-12) break;
    const Eigen::Vector2d c = 0.5 * (s[best] + s[mid]);
    const Eigen::Vector2d xr = c + (c - s[worst]);
    const double fr = f(xr);
    if (fr < fv[best]) {
      const Eigen::Vector2d xe = c + 2.0 * (c - s[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        s[worst] = xe;
        fv[worst] = fe;
      } else {
        s[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[mid]) {
      s[worst] = xr;
      fv[worst] = fr;
    } else {
      const Eigen::Vector2d xc = c + 0.5 * (s[worst] - c);
      const double fc = f(xc);
      if (fc < fv[worst]) {
        s[worst] = xc;
        fv[worst] = fc;
      } else {
        for (int i : {mid, worst}) {
          s[i] = s[best] + 0.5 * (s[i] - s[best]);
          fv[i] = f(s[i]);
        }
      }
    }
  }
  const int b = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return map(s[b]);
}

}  // namespace

EllipticityReport ellipticity_scan(const std::vector<VectorField>& fields, const Medium& m,
                                   const EllipticityOptions& opt) {
  if (fields.size() < 2) throw ParamError("ellipticity scan needs J >= 2 illuminations");
  if (fields.size() > 64) throw ParamError("ellipticity scan supports at most 64 illuminations");
  for (const auto& f : fields) require_same_grid(m.grid, f.grid, "ellipticity_scan");
  const DerivedFields der = derived_fields(m);
  const Grid& g = m.grid;
  const auto xis = fibonacci_sphere(opt.xi_samples);
  const std::size_t N = g.size();
  EllipticityReport rep;
  rep.rank_rel_tol = opt.rank_rel_tol;
  rep.point_margin.assign(N, std::numeric_limits<double>::quiet_NaN());
  rep.point_worst_xi.assign(N, Vec3d::Zero());
  const std::size_t J = fields.size();

  for (std::size_t p = 0; p < N; ++p)
    for (std::size_t j = 0; j < J; ++j)
      if (fields[j].at(p).squaredNorm() == 0.0)
        throw ZeroFieldError("field " + std::to_string(j) + " vanishes at node " + std::to_string(p));

  const auto point = [&](std::size_t p) {
    PointData d;
    d.kappa = der.kappa[p];
    d.tau_n = der.tau_n[p];
    for (std::size_t j = 0; j < J; ++j) {
      d.E.push_back(fields[j].at(p));
      d.E2.push_back(d.E.back().squaredNorm());
    }
    return d;
  };

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pp = 0; pp < static_cast<std::ptrdiff_t>(N); ++pp) {
    const auto p = static_cast<std::size_t>(pp);
    const auto [i, j, k] = g.unravel(p);
    if (g.boundary_distance(i, j, k) < opt.min_distance) continue;
    const PointData d = point(p);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t s = 0; s < xis.size(); ++s) {
      const double mg = margin_at(d, xis[s]);
      if (mg < best) {
        best = mg;
        arg = s;
      }
    }
    rep.point_margin[p] = best;
    rep.point_worst_xi[p] = xis[arg];
  }

  // serial argmin for a deterministic tie-break
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < N; ++p)
    if (!std::isnan(rep.point_margin[p]) && rep.point_margin[p] < best) {
      best = rep.point_margin[p];
      rep.argmin_node = p;
    }
  if (!std::isfinite(best)) throw ParamError("no nodes scanned");
  const PointData d = point(rep.argmin_node);
  Vec3d xi = rep.point_worst_xi[rep.argmin_node];
  if (opt.refine) {
    const Vec3d r = refine_on_sphere(d, xi, 2.0 / std::sqrt(static_cast<double>(opt.xi_samples)));
    if (margin_at(d, r) < best) {
      xi = r;
      best = margin_at(d, r);
    }
  }
  const auto [ai, aj, ak] = g.unravel(rep.argmin_node);
  const auto x = g.coord(ai, aj, ak);
  rep.argmin_x = Vec3d(x[0], x[1], x[2]);
  rep.argmin_xi = xi;
  rep.min_margin = best;
  margin_at(d, xi, &rep.min_sigma);
  rep.pass = best > opt.rank_rel_tol;
  return rep;
}

double single_illum_symbol(const Vec3c& E_hat, double tau_h, const Vec3d& xi) {
  return xi.squaredNorm() - tau_h * std::norm(bdot(E_hat, xi));
}

double single_illum_sphere_min(const Vec3c& E_hat, double tau_h) {
  const double n2 = E_hat.squaredNorm();
  if (!(n2 > 0.0)) throw ZeroFieldError("E_hat must be nonzero");
  const Eigen::Matrix3d M = (E_hat * E_hat.adjoint()).real() / n2;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  return tau_h >= 0.0 ? 1.0 - tau_h * lmax : 1.0 - tau_h * es.eigenvalues().minCoeff();
}

bool hyperbolicity_test(const Vec3c& E_hat, double tau_h) { return single_illum_sphere_min(E_hat, tau_h) < 0.0; }

double hyperbolic_threshold(const Vec3c& E_hat, double lo, double hi, double tol) {
  if (hyperbolicity_test(E_hat, lo) || !hyperbolicity_test(E_hat, hi))
    throw ParamError("bisection bracket does not contain the hyperbolic transition");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (hyperbolicity_test(E_hat, mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

std::string to_string(LopatinskiiVerdict v) {
  switch (v) {
    case LopatinskiiVerdict::covering: return "covering";
    case LopatinskiiVerdict::not_covering: return "not_covering";
    case LopatinskiiVerdict::degenerate: return "degenerate";
  }
  return "?";
}

Eigen::Matrix2cd lopatinskii_matrix(const Vec3c& E1, const Vec3c& E2, const Vec3d& nu, const Vec3d& zeta,
                                    double kappa, double tau_n, cplx lambda) {
  // Row j: symbol at the complexified covector zeta + i lambda nu.
  const cplx I(0.0, 1.0);
  Eigen::Matrix2cd M;
  int r = 0;
  for (const Vec3c* E : {&E1, &E2}) {
    const cplx ez = bdot(*E, zeta), en = bdot(*E, nu);
    const cplx ezc = std::conj(ez), enc = std::conj(en);
    // |E.xi|^2 extended bilinearly: (E.xi)(E*.xi)
    const cplx c = ez * ezc + I * lambda * (ez * enc + en * ezc) - lambda * lambda * en * enc;
    const cplx xx = zeta.squaredNorm() - lambda * lambda;  // xi.xi with zeta ⊥ nu
    M(r, 0) = -E->squaredNorm() * xx + 2.0 * kappa * c;
    M(r, 1) = 2.0 * tau_n * c;
    ++r;
  }
  return M;
}

namespace {

using Poly = std::array<cplx, 5>;  // coefficients of lambda^0..lambda^4

std::array<cplx, 3> entry_poly(const Vec3c& E, const Vec3d& nu, const Vec3d& zeta, double kappa, double tau_n,
                               int col) {
  const cplx I(0.0, 1.0);
  const cplx ez = bdot(E, zeta), en = bdot(E, nu);
  const std::array<cplx, 3> c = {std::norm(ez), I * 2.0 * std::real(ez * std::conj(en)), -std::norm(en)};
  if (col == 1) return {2.0 * tau_n * c[0], 2.0 * tau_n * c[1], 2.0 * tau_n * c[2]};
  const double e2 = E.squaredNorm();
  return {-e2 * zeta.squaredNorm() + 2.0 * kappa * c[0], 2.0 * kappa * c[1], e2 + 2.0 * kappa * c[2]};
}

Poly mul(const std::array<cplx, 3>& a, const std::array<cplx, 3>& b) {
  Poly p{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p[i + j] += a[i] * b[j];
  return p;
}

std::vector<cplx> companion_roots(const Poly& p) {
  int deg = 4;
  const double scale = std::max({std::abs(p[0]), std::abs(p[1]), std::abs(p[2]), std::abs(p[3]), std::abs(p[4])});
  while (deg > 0 && std::abs(p[deg]) <= 1e-14 * scale) --deg;
  if (deg == 0) return {};
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) C(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) C(i, deg - 1) = -p[i] / p[deg];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
  std::vector<cplx> r(es.eigenvalues().data(), es.eigenvalues().data() + deg);
  return r;
}

Eigen::Vector2cd null_vector(const Eigen::Matrix2cd& M) {
  Eigen::JacobiSVD<Eigen::Matrix2cd> svd(M, Eigen::ComputeFullV);
  return svd.matrixV().col(1);
}

}  // namespace

std::array<cplx, 4> lopatinskii_lambdas(double frak_a, double frak_b, double frak_c, double zeta_norm) {
  if (frak_a == 0.0) throw DivisionByZero("frak_a = 0");
  const cplx I(0.0, 1.0);
  const cplx sq = std::sqrt(cplx(4.0 * frak_a * frak_c - frak_b * frak_b, 0.0));
  return {cplx(zeta_norm), cplx(-zeta_norm), (I * frak_b + sq) / (2.0 * frak_a), (I * frak_b - sq) / (2.0 * frak_a)};
}

LopatinskiiReport lopatinskii_check(const Vec3c& E1, const Vec3c& E2, const Vec3d& nu, const Vec3d& zeta_tan,
                                    double kappa, double tau_n) {
  if (std::abs(nu.norm() - 1.0) > 1e-12) throw ParamError("nu must be a unit vector");
  if (std::abs(nu.dot(zeta_tan)) > 1e-12 * std::max(1.0, zeta_tan.norm()))
    throw OrthogonalityError("zeta_tan must be tangential");
  if (zeta_tan.squaredNorm() == 0.0) throw ParamError("zeta_tan must be nonzero");
  if (E1.squaredNorm() == 0.0 || E2.squaredNorm() == 0.0) throw ZeroFieldError("Lopatinskii rows need E != 0");
  LopatinskiiReport rep;
  rep.nu = nu;
  rep.zeta_tan = zeta_tan;
  const Vec3c h1 = E1 / E1.norm(), h2 = E2 / E2.norm();
  const cplx z1 = bdot(h1, zeta_tan), n1 = bdot(h1, nu), z2 = bdot(h2, zeta_tan), n2 = bdot(h2, nu);
  rep.frak_a = std::norm(n1) - std::norm(n2);
  rep.frak_b = 2.0 * std::real(z1 * std::conj(n1) - z2 * std::conj(n2));
  rep.frak_c = std::norm(z1) - std::norm(z2);
  rep.discriminant = 4.0 * rep.frak_a * rep.frak_c - rep.frak_b * rep.frak_b;
  const double zn = zeta_tan.norm();
  const double scale = std::max({std::abs(rep.frak_a), std::abs(rep.frak_b), std::abs(rep.frak_c), 1e-300});
  if (std::abs(rep.frak_a) <= 1e-12 * std::max(scale, 1.0)) {
    rep.verdict = LopatinskiiVerdict::degenerate;
    return rep;
  }
  rep.lambdas = lopatinskii_lambdas(rep.frak_a, rep.frak_b, rep.frak_c, zn);

  // independent route: roots of the determinant polynomial
  const auto p11 = entry_poly(E1, nu, zeta_tan, kappa, tau_n, 0), p12 = entry_poly(E1, nu, zeta_tan, kappa, tau_n, 1);
  const auto p21 = entry_poly(E2, nu, zeta_tan, kappa, tau_n, 0), p22 = entry_poly(E2, nu, zeta_tan, kappa, tau_n, 1);
  const Poly A = mul(p11, p22), B = mul(p12, p21);
  Poly det;
  for (int i = 0; i < 5; ++i) det[i] = A[i] - B[i];
  auto roots = companion_roots(det);
  rep.root_mismatch = 0.0;
  std::vector<bool> used(roots.size(), false);
  for (int i = 0; i < 4; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (std::size_t r = 0; r < roots.size(); ++r)
      if (!used[r] && std::abs(roots[r] - rep.lambdas[i]) < best) {
        best = std::abs(roots[r] - rep.lambdas[i]);
        arg = static_cast<int>(r);
      }
    if (arg < 0) {
      rep.root_mismatch = std::numeric_limits<double>::infinity();
      continue;
    }
    used[arg] = true;
    rep.quartic_roots[i] = roots[arg];
    rep.root_mismatch = std::max(rep.root_mismatch, best / std::max(1.0, std::abs(rep.lambdas[i])));
  }

  std::vector<Eigen::Vector2cd> modes;
  for (const cplx& l : rep.lambdas)
    if (l.real() < -1e-12 * std::max(1.0, std::abs(l)))
      modes.push_back(null_vector(lopatinskii_matrix(E1, E2, nu, zeta_tan, kappa, tau_n, l)));
  rep.decaying = static_cast<int>(modes.size());
  if (modes.size() <= 1) {
    rep.independence = 1.0;
    rep.verdict = LopatinskiiVerdict::covering;
  } else {
    const Eigen::Vector2cd& v = modes[0];
    const Eigen::Vector2cd& w = modes[1];
    rep.independence = std::abs(v[0] * w[1] - v[1] * w[0]) / (v.norm() * w.norm());
    rep.verdict = rep.independence > 1e-8 ? LopatinskiiVerdict::covering : LopatinskiiVerdict::not_covering;
  }
  return rep;
}

LopatinskiiReport lopatinskii_check_family(const std::vector<Vec3c>& E, const Vec3d& nu, const Vec3d& zeta_tan,
                                           double kappa, double tau_n, double degenerate_tol) {
  if (E.size() < 2) throw ParamError("need at least two illuminations");
  double best = -1.0;
  int bj = 0, bl = 1;
  for (std::size_t j = 0; j < E.size(); ++j)
    for (std::size_t l = j + 1; l < E.size(); ++l) {
      const double a = std::abs(std::norm(bdot(E[j], nu)) / E[j].squaredNorm() -
                                std::norm(bdot(E[l], nu)) / E[l].squaredNorm());
      if (a > best) {
        best = a;
        bj = static_cast<int>(j);
        bl = static_cast<int>(l);
      }
    }
  if (best <= degenerate_tol) throw DegenerateCase("every row pair has a = 0 at this boundary point");
  LopatinskiiReport r = lopatinskii_check(E[bj], E[bl], nu, zeta_tan, kappa, tau_n);
  r.pair_j = bj;
  r.pair_l = bl;
  return r;
}

}  // namespace qtat
