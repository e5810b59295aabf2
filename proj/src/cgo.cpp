#include "qtat/cgo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qtat/errors.hpp"

namespace qtat {

std::size_t CgoBox::box_index(std::size_t node) const {
  const auto [i, j, k] = grid.unravel(node);
  return fft->index(i + offset[0], j + offset[1], k + offset[2]);
}

Vec3d CgoBox::coord(std::size_t idx) const {
  const auto& d = fft->dims();
  const int k = static_cast<int>(idx % d[2]);
  const int j = static_cast<int>((idx / d[2]) % d[1]);
  const int i = static_cast<int>(idx / (static_cast<std::size_t>(d[2]) * d[1]));
  return origin + fft->h() * Vec3d(i, j, k);
}

Vec3d CgoBox::center() const {
  const auto c = grid.center();
  return Vec3d(c[0], c[1], c[2]);
}

CgoBox make_cgo_box(const Grid& g, double box_factor) {
  if (!(box_factor >= 1.5)) throw ParamError("box_factor must be >= 1.5");
  CgoBox b;
  b.grid = g;
  std::array<int, 3> P{};
  for (int a = 0; a < 3; ++a) {
    const int cells = g.dims[a] - 1;
    P[a] = std::max(static_cast<int>(std::lround(box_factor * cells)), g.dims[a] + 2);
    P[a] += P[a] % 2;
    b.offset[a] = (P[a] - cells) / 2;
    b.origin[a] = g.origin[a] - b.offset[a] * g.spacing;
  }
  b.fft = std::make_shared<const FftBox>(P, g.spacing);
  return b;
}

Eigen::VectorXcd embed(const CgoBox& b, const Eigen::VectorXcd& on_grid, cplx fill) {
  if (static_cast<std::size_t>(on_grid.size()) != b.grid.size()) throw GridMismatch("embed: size mismatch");
  Eigen::VectorXcd out = Eigen::VectorXcd::Constant(b.fft->size(), fill);
  for (std::size_t p = 0; p < b.grid.size(); ++p) out[b.box_index(p)] = on_grid[p];
  return out;
}

Eigen::VectorXcd restrict_to_grid(const CgoBox& b, const Eigen::VectorXcd& on_box) {
  if (static_cast<std::size_t>(on_box.size()) != b.fft->size()) throw GridMismatch("restrict: size mismatch");
  Eigen::VectorXcd out(b.grid.size());
  for (std::size_t p = 0; p < b.grid.size(); ++p) out[p] = on_box[b.box_index(p)];
  return out;
}

int resonance_axis(const Vec3c& zeta) {
  int a = 0;
  for (int c = 1; c < 3; ++c)
    if (std::abs(zeta[c].imag()) > std::abs(zeta[a].imag())) a = c;
  return a;
}

FaddeevKernel faddeev_kernel(const FftBox& box, const Vec3c& zeta, int shift_axis, double floor_rel) {
  FaddeevKernel G;
  G.zeta = zeta;
  G.dims = box.dims();
  for (int a = 0; a < 3; ++a) G.box_length[a] = box.length(a);
  G.shift_axis = shift_axis;
  G.denom.resize(box.size());
  const auto n = static_cast<std::ptrdiff_t>(box.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
    const Vec3d x = box.xi(idx, shift_axis);
    G.denom[idx] = x.squaredNorm() + 2.0 * bdot(zeta, x);
  }
  G.min_denom = G.denom.cwiseAbs().minCoeff();
  G.denom_floor = floor_rel * zeta.squaredNorm();
  if (!(G.min_denom > G.denom_floor))
    throw ResonanceError("lattice frequency within " + std::to_string(G.min_denom) +
                         " of the resonance set; change s or the box length");
  return G;
}

Eigen::VectorXcd faddeev_apply(const FftBox& box, const FaddeevKernel& G, const Eigen::VectorXcd& f) {
  if (G.dims != box.dims()) throw GridMismatch("kernel built for a different box");
  Eigen::VectorXcd g = f;
  box.forward(g, G.shift_axis);
  g.array() /= G.denom.array();
  box.inverse(g, G.shift_axis);
  return g;
}

BoxVec faddeev_apply(const FftBox& box, const FaddeevKernel& G, const BoxVec& f) {
  return {faddeev_apply(box, G, f[0]), faddeev_apply(box, G, f[1]), faddeev_apply(box, G, f[2])};
}

double background_n(const Medium& m, int collar) {
  const Grid& g = m.grid;
  const double nc = m.n[0];
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto [i, j, k] = g.unravel(p);
    if (g.boundary_distance(i, j, k) >= collar) continue;
    if (m.n[p] != nc || m.sigma[p] != 0.0)
      throw SupportError("gamma0 - 1 does not vanish in the collar (node " + std::to_string(p) +
                         "); CGO needs sigma = 0 and constant n there");
  }
  return nc;
}

namespace {

Eigen::VectorXcd centered(const FftBox& box, const Eigen::VectorXcd& f, int axis) {
  const auto& d = box.dims();
  Eigen::VectorXcd out(f.size());
  const double inv = 1.0 / (2.0 * box.h());
  for (int i = 0; i < d[0]; ++i)
    for (int j = 0; j < d[1]; ++j)
      for (int k = 0; k < d[2]; ++k) {
        std::array<int, 3> p{i, j, k}, q{i, j, k};
        p[axis] = (p[axis] + 1) % d[axis];
        q[axis] = (q[axis] - 1 + d[axis]) % d[axis];
        out[box.index(i, j, k)] = (f[box.index(p[0], p[1], p[2])] - f[box.index(q[0], q[1], q[2])]) * inv;
      }
  return out;
}

Eigen::VectorXcd diff(const FftBox& box, const Eigen::VectorXcd& f, int axis, Differentiation how) {
  return how == Differentiation::spectral ? box.derivative(f, axis, FftBox::kPeriodic) : centered(box, f, axis);
}

Vec3c at(const BoxVec& v, std::size_t i) { return Vec3c(v[0][i], v[1][i], v[2][i]); }
void put(BoxVec& v, std::size_t i, const Vec3c& x) {
  for (int c = 0; c < 3; ++c) v[c][i] = x[c];
}
BoxVec zeros(std::size_t n) {
  return {Eigen::VectorXcd::Zero(n), Eigen::VectorXcd::Zero(n), Eigen::VectorXcd::Zero(n)};
}

}  // namespace

AlphaQ build_alpha_q(const Medium& m, const CgoBox& box, Differentiation how, int collar) {
  require_same_grid(m.grid, box.grid, "build_alpha_q");
  AlphaQ aq;
  aq.n_c = background_n(m, collar);
  aq.k = m.omega * std::sqrt(aq.n_c);
  const double k2 = aq.k * aq.k;
  const FftBox& F = *box.fft;
  const std::size_t N = F.size();
  aq.gamma0 = embed(box, eval_q(m) / k2, 1.0);
  aq.gamma_half = aq.gamma0.array().sqrt();
  aq.gamma_mhalf = aq.gamma_half.cwiseInverse();
  for (int c = 0; c < 3; ++c) aq.alpha[c] = diff(F, aq.gamma0, c, how).cwiseQuotient(aq.gamma0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) aq.grad_alpha[3 * i + j] = diff(F, aq.alpha[j], i, how);
  aq.frak_q = Eigen::VectorXcd::Zero(N);
  for (int c = 0; c < 3; ++c)
    aq.frak_q += 0.25 * aq.alpha[c].cwiseProduct(aq.alpha[c]) + 0.5 * aq.grad_alpha[4 * c];
  return aq;
}

namespace {

double weighted_norm(const BoxVec& v, const Eigen::VectorXd& w, double h) {
  double s = 0.0;
  for (const auto& c : v) s += (c.cwiseAbs2().array() * w.array()).sum();
  return std::sqrt(s * h * h * h);
}

}  // namespace

CgoSolution cgo_solve(const Medium& m, const CgoParams& p, const CgoOptions& opt) {
  CgoSolution sol;
  sol.box = make_cgo_box(m.grid, opt.box_factor);
  sol.aq = build_alpha_q(m, sol.box, opt.diff, opt.collar);
  sol.params = p;
  const AlphaQ& aq = sol.aq;
  if (std::abs(p.k - aq.k) > 1e-12 * std::max(1.0, aq.k))
    throw ParamError("CgoParams.k = " + std::to_string(p.k) + " but the medium gives k = omega sqrt(n_c) = " +
                     std::to_string(aq.k));
  const FftBox& F = *sol.box.fft;
  const std::size_t N = F.size();
  const double k2 = aq.k * aq.k;
  const cplx I(0.0, 1.0);
  sol.kernel = faddeev_kernel(F, p.zeta, resonance_axis(p.zeta), opt.denom_floor_rel);
  const Vec3c eta = p.eta_zeta;
  const Vec3c far = I * cross(p.zeta, eta);
  const double ff = opt.far_field_q ? 1.0 : 0.0;

  Eigen::VectorXd w(N);
  const Vec3d c = sol.box.center();
  for (std::size_t i = 0; i < N; ++i) w[i] = std::pow(1.0 + (sol.box.coord(i) - c).squaredNorm(), opt.theta);

  const auto n = static_cast<std::ptrdiff_t>(N);
  BoxVec fR = zeros(N), fQ = zeros(N);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Vec3c al = at(aq.alpha, i);
    const cplx g1 = aq.gamma0[i] - 1.0, gh = aq.gamma_half[i];
    Vec3c etagrad;
    for (int j = 0; j < 3; ++j)
      etagrad[j] = eta[0] * aq.grad_alpha[j][i] + eta[1] * aq.grad_alpha[3 + j][i] + eta[2] * aq.grad_alpha[6 + j][i];
    put(fR, i, etagrad + k2 * g1 * eta - aq.frak_q[i] * eta + ff * gh * cross(al, far));
    put(fQ, i, k2 * gh * cross(al, eta) + ff * k2 * g1 * far);
  }

  RemainderPair& rq = sol.rq;
  rq.far_field_q = opt.far_field_q;
  BoxVec Rm = faddeev_apply(F, sol.kernel, fR), Qm = faddeev_apply(F, sol.kernel, fQ);
  rq.R = Rm;
  rq.Q = Qm;
  const double first = weighted_norm(Rm, w, F.h()) + weighted_norm(Qm, w, F.h());
  rq.term_norms.push_back(first);
  rq.series_terms = 1;
  rq.tail_norm = first > 0.0 ? 1.0 : 0.0;
  while (first > 0.0 && rq.tail_norm >= opt.tol) {
    if (rq.series_terms >= opt.m_cap)
      throw NoConvergence("Neumann series hit m_cap = " + std::to_string(opt.m_cap) +
                          " with tail " + std::to_string(rq.tail_norm));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      const Vec3c al = at(aq.alpha, i), r = at(Rm, i), q = at(Qm, i);
      const cplx g1 = aq.gamma0[i] - 1.0, gh = aq.gamma_half[i];
      Vec3c rgrad;
      for (int j = 0; j < 3; ++j)
        rgrad[j] = r[0] * aq.grad_alpha[j][i] + r[1] * aq.grad_alpha[3 + j][i] + r[2] * aq.grad_alpha[6 + j][i];
      put(fR, i, gh * cross(al, q) + rgrad + k2 * g1 * r - aq.frak_q[i] * r);
      put(fQ, i, k2 * gh * cross(al, r) + k2 * g1 * q);
    }
    Rm = faddeev_apply(F, sol.kernel, fR);
    Qm = faddeev_apply(F, sol.kernel, fQ);
    const double t = weighted_norm(Rm, w, F.h()) + weighted_norm(Qm, w, F.h());
    if (t >= rq.term_norms.back())
      throw NoContraction("Neumann term ratio " + std::to_string(t / rq.term_norms.back()) + " >= 1 at m = " +
                          std::to_string(rq.series_terms) + "; increase s");
    rq.term_norms.push_back(t);
    for (int cc = 0; cc < 3; ++cc) {
      rq.R[cc] += Rm[cc];
      rq.Q[cc] += Qm[cc];
    }
    ++rq.series_terms;
    rq.tail_norm = t / first;
  }
  if (opt.far_field_q)
    for (int cc = 0; cc < 3; ++cc) rq.Q[cc].array() += far[cc];

  // assemble E on the medium grid
  const Grid& g = m.grid;
  const auto gc = g.center();
  sol.phase_origin = opt.phase_origin.value_or(Vec3d(gc[0], gc[1], gc[2]));
  sol.E = VectorField(g);
  sol.min_abs_E = std::numeric_limits<double>::infinity();
  for (std::size_t node = 0; node < g.size(); ++node) {
    const auto [i, j, k] = g.unravel(node);
    const auto x = g.coord(i, j, k);
    const Vec3d xr = Vec3d(x[0], x[1], x[2]) - sol.phase_origin;
    const std::size_t b = sol.box.box_index(node);
    const Vec3c E = aq.gamma_mhalf[b] * std::exp(I * bdot(p.zeta, xr)) * (eta + at(rq.R, b));
    sol.E.set(node, E);
    sol.min_abs_E = std::min(sol.min_abs_E, E.norm());
  }
  return sol;
}

RemainderPair neumann_series_RQ(const Medium& m, const CgoParams& p, const CgoOptions& opt) {
  return cgo_solve(m, p, opt).rq;
}

VectorField cgo_field(const Medium& m, const CgoParams& p, const CgoOptions& opt) { return cgo_solve(m, p, opt).E; }

namespace {

// v = gamma0^{-1/2}(eta + R) - eta, antiperiodic class.
BoxVec conjugated_v(const CgoSolution& sol) {
  const std::size_t N = sol.box.fft->size();
  BoxVec v = zeros(N);
  const Vec3c eta = sol.params.eta_zeta;
  for (int c = 0; c < 3; ++c)
    v[c] = sol.aq.gamma_mhalf.cwiseProduct(sol.rq.R[c]) +
           (sol.aq.gamma_mhalf.array() - 1.0).matrix() * eta[c];
  return v;
}

// Apply a per-frequency 3x3 map given kappa = xi + zeta.
template <class Fn>
BoxVec spectral_map(const CgoSolution& sol, BoxVec v, Fn fn) {
  const FftBox& F = *sol.box.fft;
  const int sh = sol.kernel.shift_axis;
  for (auto& c : v) F.forward(c, sh);
  const auto n = static_cast<std::ptrdiff_t>(F.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const Vec3c kap = F.xi(ii, sh).cast<cplx>() + sol.params.zeta;
    put(v, ii, fn(kap, at(v, ii)));
  }
  for (auto& c : v) F.inverse(c, sh);
  return v;
}

template <class Fn>
double interior_ratio(const CgoSolution& sol, int collar, Fn num_den) {
  const Grid& g = sol.box.grid;
  double num = 0, den = 0;
  for (std::size_t node = 0; node < g.size(); ++node) {
    const auto [i, j, k] = g.unravel(node);
    if (g.boundary_distance(i, j, k) < collar) continue;
    const auto [a, b] = num_den(sol.box.box_index(node));
    num += a;
    den += b;
  }
  return den > 0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace

double cgo_residual(const CgoSolution& sol, int collar) {
  const BoxVec v = conjugated_v(sol);
  // -(curl + i zeta x)^2 v  <->  kappa (kappa.v) - (kappa.kappa) v
  const BoxVec cc = spectral_map(sol, v, [](const Vec3c& kap, const Vec3c& x) -> Vec3c {
    return kap * bdot(kap, x) - bdot(kap, kap) * x;
  });
  const double k2 = sol.aq.k * sol.aq.k;
  const Vec3c eta = sol.params.eta_zeta;
  return interior_ratio(sol, collar, [&](std::size_t b) {
    const Vec3c u = eta + at(v, b);
    const cplx q = k2 * sol.aq.gamma0[b];
    // constant eta: -(i zeta x)^2 eta = -k^2 eta
    const Vec3c res = at(cc, b) - k2 * eta + q * u;
    return std::pair<double, double>(res.squaredNorm(), (q * u).squaredNorm());
  });
}

double cgo_q_consistency(const CgoSolution& sol, int collar) {
  const cplx I(0.0, 1.0);
  const BoxVec v = conjugated_v(sol);
  const BoxVec cv = spectral_map(sol, v, [&](const Vec3c& kap, const Vec3c& x) -> Vec3c {
    return I * cross(kap, x);
  });
  const Vec3c far = I * cross(sol.params.zeta, sol.params.eta_zeta);
  return interior_ratio(sol, collar, [&](std::size_t b) {
    const Vec3c W = at(cv, b) + far;
    const Vec3c Q = at(sol.rq.Q, b);
    return std::pair<double, double>((Q - W).squaredNorm(), Q.squaredNorm());
  });
}

double remainder_norm(const CgoSolution& sol) {
  const Grid& g = sol.box.grid;
  double s = 0;
  for (std::size_t node = 0; node < g.size(); ++node) s += at(sol.rq.R, sol.box.box_index(node)).squaredNorm();
  return std::sqrt(s * std::pow(g.spacing, 3));
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParamError("slope needs >= 2 paired samples");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw ParamError("log-log slope needs positive samples");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

DecayStudy decay_study(const Medium& m, const Vec3d& rho, const Vec3d& rho_perp, const std::vector<double>& s_list,
                       const CgoOptions& opt) {
  const double k = m.omega * std::sqrt(background_n(m, opt.collar));
  DecayStudy st;
  std::vector<double> zx, ry;
  for (double s : s_list) {
    const CgoParams p = cgo_params(s, rho, rho_perp, k);
    const CgoSolution sol = cgo_solve(m, p, opt);
    DecayRow r;
    r.s = s;
    r.zeta_norm = p.zeta.norm();
    r.eta_norm = p.eta_zeta.norm();
    r.r_norm = remainder_norm(sol);
    r.scaled = r.r_norm * r.zeta_norm / r.eta_norm;
    r.residual = cgo_residual(sol, opt.collar);
    r.terms = sol.rq.series_terms;
    st.rows.push_back(r);
    zx.push_back(r.zeta_norm);
    ry.push_back(r.r_norm / r.eta_norm);
  }
  if (st.rows.size() >= 2) st.slope = loglog_slope(zx, ry);
  return st;
}

}  // namespace qtat
