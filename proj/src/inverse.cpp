#include "qtat/inverse.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qtat/errors.hpp"
#include "qtat/spectral.hpp"
#include "qtat/stencil.hpp"

namespace qtat {

Eigen::VectorXd frechet_dH(const Eigen::VectorXd& sigma, const VectorField& E, const VectorField& dE,
                           const Eigen::VectorXd& dsigma) {
  require_same_grid(E.grid, dE.grid, "frechet_dH");
  const auto N = static_cast<Eigen::Index>(E.nodes());
  if (sigma.size() != N || dsigma.size() != N) throw GridMismatch("frechet_dH: scalar field size");
  Eigen::VectorXd out(N);
  for (Eigen::Index p = 0; p < N; ++p) {
    const Vec3c e = E.values.segment<3>(3 * p);
    const Vec3c de = dE.values.segment<3>(3 * p);
    out[p] = 2.0 * sigma[p] * (de.dot(e)).real() + dsigma[p] * e.squaredNorm();
  }
  return out;
}

LinearizedSystem make_linearized_system(const Medium& background, std::vector<VectorField> E) {
  if (E.empty()) throw ParamError("linearized system needs at least one field");
  for (const auto& e : E) require_same_grid(background.grid, e.grid, "make_linearized_system");
  LinearizedSystem sys;
  sys.background = background;
  sys.E = std::move(E);
  return sys;
}

Eigen::VectorXd pack(const LinearizedSystem& sys, const Perturbation& w) {
  const std::size_t N = sys.nodes();
  if (w.dE.size() != sys.illuminations()) throw GridMismatch("pack: illumination count");
  if (static_cast<std::size_t>(w.dsigma.size()) != N || static_cast<std::size_t>(w.dn.size()) != N)
    throw GridMismatch("pack: scalar field size");
  Eigen::VectorXd x(sys.unknown_size());
  for (std::size_t j = 0; j < w.dE.size(); ++j) {
    require_same_grid(sys.grid(), w.dE[j].grid, "pack");
    const std::size_t o = sys.field_offset(j);
    for (std::size_t i = 0; i < 3 * N; ++i) {
      x[o + 2 * i] = w.dE[j].values[i].real();
      x[o + 2 * i + 1] = w.dE[j].values[i].imag();
    }
  }
  x.segment(sys.dsigma_offset(), N) = w.dsigma;
  x.segment(sys.dn_offset(), N) = w.dn;
  return x;
}

namespace {

Eigen::VectorXcd complex_block(const Eigen::VectorXd& x, std::size_t offset, std::size_t count) {
  Eigen::VectorXcd z(count);
  for (std::size_t i = 0; i < count; ++i) z[i] = cplx(x[offset + 2 * i], x[offset + 2 * i + 1]);
  return z;
}

void store_complex(Eigen::VectorXd& x, std::size_t offset, const Eigen::VectorXcd& z) {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    x[offset + 2 * i] = z[i].real();
    x[offset + 2 * i + 1] = z[i].imag();
  }
}

void check_sizes(const LinearizedSystem& sys, const Eigen::VectorXd& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) throw GridMismatch(what);
  (void)sys;
}

}  // namespace

Perturbation unpack(const LinearizedSystem& sys, const Eigen::VectorXd& x) {
  check_sizes(sys, x, sys.unknown_size(), "unpack: size");
  const std::size_t N = sys.nodes();
  Perturbation w;
  for (std::size_t j = 0; j < sys.illuminations(); ++j)
    w.dE.emplace_back(sys.grid(), complex_block(x, sys.field_offset(j), 3 * N));
  w.dsigma = x.segment(sys.dsigma_offset(), N);
  w.dn = x.segment(sys.dn_offset(), N);
  return w;
}

namespace {

template <class F>
void for_rows(const Grid& g, F&& f) {
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 1; j < ny - 1; ++j)
      for (int k = 1; k < nz - 1; ++k) f(g.index(i, j, k));
}

// Linearized Maxwell rows: Lap dE + q dE + (1/q)[grad div, q] dE plus the
// q-derivative of the same form at E in direction dq. Same entries as
// apply_elliptic_form + apply_elliptic_form_dq, with 1/q precomputed.
Eigen::VectorXcd maxwell_rows(const Grid& g, const Eigen::VectorXcd& q, const Eigen::VectorXcd& iq,
                              const Eigen::VectorXcd& E, const Eigen::VectorXcd& dE, const Eigen::VectorXcd& dq) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dE.size());
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for_rows(g, [&](std::size_t p) {
    const cplx qp = q[p], iqp = iq[p], dqp = dq[p];
    for (int a = 0; a < 3; ++a) {
      cplx lap = (-6.0 * ih2 + qp) * dE[3 * p + a];
      for (int c = 0; c < 3; ++c) lap += ih2 * (dE[3 * (p + st[c]) + a] + dE[3 * (p - st[c]) + a]);
      cplx comm = 0.0, dcomm = 0.0;
      stencil::grad_div_neighbors(g, p, a, [&](std::size_t y, int b, double w) {
        comm += w * (q[y] - qp) * dE[3 * y + b];
        dcomm += w * (dq[y] - q[y] * dqp * iqp) * E[3 * y + b];
      });
      out[3 * p + a] = lap + dqp * E[3 * p + a] + (comm + dcomm) * iqp;
    }
  });
  return out;
}

}  // namespace

Eigen::VectorXd apply_linearized(const LinearizedSystem& sys, const Eigen::VectorXd& x) {
  check_sizes(sys, x, sys.unknown_size(), "apply_linearized: size");
  const Medium& m = sys.background;
  const Grid& g = sys.grid();
  const std::size_t N = sys.nodes();
  const auto J = static_cast<int>(sys.illuminations());
  const Eigen::VectorXd dsigma = x.segment(sys.dsigma_offset(), N);
  const Eigen::VectorXd dn = x.segment(sys.dn_offset(), N);
  const Eigen::VectorXcd dq = eval_dq(m.omega, dsigma, dn);
  const Eigen::VectorXcd q = eval_q(m);
  const Eigen::VectorXcd iq = q.cwiseInverse();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(sys.row_size());
#pragma omp parallel for schedule(static)
  for (int j = 0; j < J; ++j) {
    const VectorField dE(g, complex_block(x, sys.field_offset(j), 3 * N));
    const Eigen::VectorXcd M = maxwell_rows(g, q, iq, sys.E[j].values, dE.values, dq);
    store_complex(out, sys.maxwell_offset(j), M);
    store_complex(out, sys.conj_offset(j), M.conjugate());
    const Eigen::VectorXd dH = frechet_dH(m.sigma, sys.E[j], dE, dsigma);
    out.segment(sys.data_offset(j), N) = stencil::laplacian(g, dH);
  }
  return out;
}

namespace {

// Hermitian adjoint of the dE part of maxwell_rows.
Eigen::VectorXcd elliptic_adjoint(const Grid& g, const Eigen::VectorXcd& q, const Eigen::VectorXcd& iq,
                                  const Eigen::VectorXcd& r) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(r.size());
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for_rows(g, [&](std::size_t p) {
    const cplx qp = q[p];
    for (int a = 0; a < 3; ++a) {
      const cplx rp = r[3 * p + a];
      const cplx riq = std::conj(iq[p]) * rp;
      out[3 * p + a] += std::conj(-6.0 * ih2 + qp) * rp;
      for (int c = 0; c < 3; ++c) {
        out[3 * (p + st[c]) + a] += ih2 * rp;
        out[3 * (p - st[c]) + a] += ih2 * rp;
      }
      stencil::grad_div_neighbors(g, p, a, [&](std::size_t y, int b, double w) {
        out[3 * y + b] += w * std::conj(q[y] - qp) * riq;
      });
    }
  });
  return out;
}

// Hermitian adjoint of the dq part of maxwell_rows.
Eigen::VectorXcd dq_adjoint(const Grid& g, const Eigen::VectorXcd& q, const Eigen::VectorXcd& iq,
                            const Eigen::VectorXcd& E, const Eigen::VectorXcd& r) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(g.size()));
  for_rows(g, [&](std::size_t p) {
    const cplx iqp = iq[p];
    for (int a = 0; a < 3; ++a) {
      const cplx rp = r[3 * p + a];
      const cplx riq = std::conj(iqp) * rp;
      cplx center = 0.0;
      stencil::grad_div_neighbors(g, p, a, [&](std::size_t y, int b, double w) {
        const cplx wE = w * E[3 * y + b];
        center += wE * q[y];
        out[y] += std::conj(wE) * riq;
      });
      out[p] += std::conj(E[3 * p + a] - center * iqp * iqp) * rp;
    }
  });
  return out;
}

Eigen::VectorXd laplacian_adjoint(const Grid& g, const Eigen::VectorXd& r) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(r.size());
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for_rows(g, [&](std::size_t p) {
    out[p] -= 6.0 * ih2 * r[p];
    for (int c = 0; c < 3; ++c) {
      out[p + st[c]] += ih2 * r[p];
      out[p - st[c]] += ih2 * r[p];
    }
  });
  return out;
}

}  // namespace

Eigen::VectorXd apply_linearized_transpose(const LinearizedSystem& sys, const Eigen::VectorXd& r) {
  check_sizes(sys, r, sys.row_size(), "apply_linearized_transpose: size");
  const Medium& m = sys.background;
  const Grid& g = sys.grid();
  const std::size_t N = sys.nodes();
  const auto J = static_cast<int>(sys.illuminations());
  const Eigen::VectorXcd q = eval_q(m);
  const Eigen::VectorXcd iq = q.cwiseInverse();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(sys.unknown_size());
  std::vector<Eigen::VectorXd> gs(J), gn(J);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < J; ++j) {
    const Eigen::VectorXcd rm =
        complex_block(r, sys.maxwell_offset(j), 3 * N) + complex_block(r, sys.conj_offset(j), 3 * N).conjugate();
    Eigen::VectorXcd aE = elliptic_adjoint(g, q, iq, rm);
    const Eigen::VectorXcd& e = sys.E[j].values;
    const Eigen::VectorXcd aq = dq_adjoint(g, q, iq, e, rm);
    gs[j] = m.omega * aq.imag();
    gn[j] = m.omega * m.omega * aq.real();
    const Eigen::VectorXd ld = laplacian_adjoint(g, r.segment(sys.data_offset(j), N));
    for (std::size_t p = 0; p < N; ++p) {
      aE.segment<3>(3 * p) += 2.0 * m.sigma[p] * ld[p] * e.segment<3>(3 * p);
      gs[j][p] += e.segment<3>(3 * p).squaredNorm() * ld[p];
    }
    store_complex(out, sys.field_offset(j), aE);
  }
  for (int j = 0; j < J; ++j) {
    out.segment(sys.dsigma_offset(), N) += gs[j];
    out.segment(sys.dn_offset(), N) += gn[j];
  }
  return out;
}

Eigen::VectorXd data_rows(const LinearizedSystem& sys, const std::vector<Eigen::VectorXd>& dH) {
  if (dH.size() != sys.illuminations()) throw GridMismatch("data_rows: illumination count");
  Eigen::VectorXd S = Eigen::VectorXd::Zero(sys.row_size());
  for (std::size_t j = 0; j < dH.size(); ++j) {
    if (static_cast<std::size_t>(dH[j].size()) != sys.nodes()) throw GridMismatch("data_rows: field size");
    S.segment(sys.data_offset(j), sys.nodes()) = stencil::laplacian(sys.grid(), dH[j]);
  }
  return S;
}

namespace {

// Calls f(slot at p, same slot at y) for every unknown slot.
template <class F>
void paired_slots(const LinearizedSystem& sys, std::size_t p, std::size_t y, F&& f) {
  for (std::size_t j = 0; j < sys.illuminations(); ++j)
    for (int s = 0; s < 6; ++s) f(sys.field_offset(j) + 6 * p + s, sys.field_offset(j) + 6 * y + s);
  f(sys.dsigma_offset() + p, sys.dsigma_offset() + y);
  f(sys.dn_offset() + p, sys.dn_offset() + y);
}

template <class F>
void node_slots(const LinearizedSystem& sys, std::size_t p, F&& f) {
  paired_slots(sys, p, p, [&](std::size_t s, std::size_t) { f(s); });
}

// Single normal axis of a face-interior boundary node, or -1.
int face_axis(const Grid& g, const std::array<int, 3>& ijk) {
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (ijk[a] == 0 || ijk[a] == g.dims[a] - 1) {
      if (axis >= 0) return -1;
      axis = a;
    }
  }
  return axis;
}

std::ptrdiff_t inward(const Grid& g, const std::array<int, 3>& ijk, int a) {
  return ijk[a] == 0 ? g.strides()[a] : -g.strides()[a];
}

}  // namespace

BoundaryTraces zero_traces(const LinearizedSystem& sys) {
  return {Eigen::VectorXd::Zero(sys.unknown_size()), Eigen::VectorXd::Zero(sys.unknown_size())};
}

BoundaryTraces traces_of(const LinearizedSystem& sys, const Eigen::VectorXd& w) {
  check_sizes(sys, w, sys.unknown_size(), "traces_of: size");
  const Grid& g = sys.grid();
  BoundaryTraces t = zero_traces(sys);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto ijk = g.unravel(p);
    if (!g.on_boundary(ijk[0], ijk[1], ijk[2])) continue;
    const int a = face_axis(g, ijk);
    const std::size_t pin = a >= 0 ? p + inward(g, ijk, a) : p;
    paired_slots(sys, p, pin, [&](std::size_t s, std::size_t si) {
      t.value[s] = w[s];
      if (a >= 0) t.normal[s] = (w[s] - w[si]) / g.spacing;
    });
  }
  return t;
}

Eigen::VectorXd extend_traces(const LinearizedSystem& sys, const BoundaryTraces& t) {
  check_sizes(sys, t.value, sys.unknown_size(), "extend_traces: value size");
  check_sizes(sys, t.normal, sys.unknown_size(), "extend_traces: normal size");
  const Grid& g = sys.grid();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(sys.unknown_size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto ijk = g.unravel(p);
    const int d = g.boundary_distance(ijk[0], ijk[1], ijk[2]);
    if (d == 0) {
      node_slots(sys, p, [&](std::size_t s) { w[s] = t.value[s]; });
    } else if (d == 1) {
      int a = 0;
      while (ijk[a] != 1 && ijk[a] != g.dims[a] - 2) ++a;
      // boundary neighbor across axis a
      const std::ptrdiff_t step = ijk[a] == 1 ? -g.strides()[a] : g.strides()[a];
      const std::size_t nb = p + step;
      paired_slots(sys, p, nb, [&](std::size_t s, std::size_t sb) {
        w[s] = t.value[sb] - g.spacing * t.normal[sb];
      });
    }
  }
  return w;
}

Eigen::VectorXd free_mask(const LinearizedSystem& sys) {
  const Grid& g = sys.grid();
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(sys.unknown_size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto ijk = g.unravel(p);
    if (g.boundary_distance(ijk[0], ijk[1], ijk[2]) < kTraceLayers) continue;
    node_slots(sys, p, [&](std::size_t s) { mask[s] = 1.0; });
    if (sys.freeze_dsigma) mask[sys.dsigma_offset() + p] = 0.0;
    if (sys.freeze_dn) mask[sys.dn_offset() + p] = 0.0;
  }
  return mask;
}

namespace {

// diag(A^t A) on free unknowns by probing with columns whose row supports
// are disjoint: nodes of one residue class mod 3 per axis, one slot kind at
// a time (field slots of different illuminations hit disjoint row blocks).
Eigen::VectorXd normal_diagonal(const LinearizedSystem& sys, const Eigen::VectorXd& mask) {
  const Grid& g = sys.grid();
  const std::size_t J = sys.illuminations();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(sys.unknown_size());
  std::vector<std::size_t> members;
  for (int color = 0; color < 27; ++color) {
    const int ci = color / 9, cj = (color / 3) % 3, ck = color % 3;
    members.clear();
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto ijk = g.unravel(p);
      if (ijk[0] % 3 == ci && ijk[1] % 3 == cj && ijk[2] % 3 == ck) members.push_back(p);
    }
    for (int kind = 0; kind < 8; ++kind) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(sys.unknown_size());
      auto slot = [&](std::size_t p, std::size_t j) {
        if (kind < 6) return sys.field_offset(j) + 6 * p + kind;
        return kind == 6 ? sys.dsigma_offset() + p : sys.dn_offset() + p;
      };
      bool any = false;
      for (std::size_t p : members)
        for (std::size_t j = 0; j < (kind < 6 ? J : 1); ++j) {
          const std::size_t s = slot(p, j);
          if (mask[s] != 0.0) {
            e[s] = 1.0;
            any = true;
          }
        }
      if (!any) continue;
      const Eigen::VectorXd Ae = apply_linearized(sys, e);
      for (std::size_t p : members) {
        const auto ijk = g.unravel(p);
        for (std::size_t j = 0; j < (kind < 6 ? J : 1); ++j) {
          const std::size_t s = slot(p, j);
          if (mask[s] == 0.0) continue;
          double acc = 0.0;
          for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
              for (int dk = -1; dk <= 1; ++dk) {
                const std::size_t y = g.index(ijk[0] + di, ijk[1] + dj, ijk[2] + dk);
                for (std::size_t jj = 0; jj < J; ++jj) {
                  if (kind < 6 && jj != j) continue;
                  for (int c = 0; c < 6; ++c) {
                    acc += std::pow(Ae[sys.maxwell_offset(jj) + 6 * y + c], 2);
                    acc += std::pow(Ae[sys.conj_offset(jj) + 6 * y + c], 2);
                  }
                  acc += std::pow(Ae[sys.data_offset(jj) + y], 2);
                }
              }
          diag[s] = acc;
        }
      }
    }
  }
  return diag;
}

double tridiagonal_extreme(const std::vector<double>& d, const std::vector<double>& off, bool want_min) {
  if (d.empty()) return 0.0;
  const auto n = static_cast<Eigen::Index>(d.size());
  Eigen::VectorXd dd = Eigen::Map<const Eigen::VectorXd>(d.data(), n);
  Eigen::VectorXd oo = n > 1 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(off.data(), n - 1))
                             : Eigen::VectorXd();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(dd, oo, Eigen::EigenvaluesOnly);
  return want_min ? es.eigenvalues().minCoeff() : es.eigenvalues().maxCoeff();
}

}  // namespace

NormalSolveResult normal_solve(const LinearizedSystem& sys, const Eigen::VectorXd& S, const BoundaryTraces& traces,
                               const NormalSolveOptions& opt) {
  check_sizes(sys, S, sys.row_size(), "normal_solve: right side size");
  const Eigen::VectorXd mask = free_mask(sys);
  const Eigen::VectorXd wb = extend_traces(sys, traces);
  const Eigen::VectorXd Seff = S - apply_linearized(sys, wb);
  NormalSolveResult res;
  res.w = wb;
  const Eigen::VectorXd b = mask.cwiseProduct(apply_linearized_transpose(sys, Seff));
  const double bnorm = b.norm();
  if (bnorm == 0.0) return res;
  res.reg = opt.reg ? *opt.reg : 1e-8 * bnorm / Seff.norm();
  if (res.reg < 0.0) throw ParamError("regularization weight must be >= 0");

  auto op = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return mask.cwiseProduct(apply_linearized_transpose(sys, apply_linearized(sys, v))) + res.reg * v;
  };
  Eigen::VectorXd d = normal_diagonal(sys, mask).array() + res.reg;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (mask[i] == 0.0 || d[i] <= 0.0) d[i] = 1.0;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = r.cwiseQuotient(d);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  std::vector<double> alphas, betas;
  double best = bnorm;
  int since_best = 0;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const Eigen::VectorXd Ap = op(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    alphas.push_back(alpha);
    const double rn = r.norm();
    if (rn <= opt.tol * bnorm) {
      converged = true;
      ++it;
      break;
    }
    if (rn < best) {
      best = rn;
      since_best = 0;
    } else if (++since_best >= opt.stagnation_window) {
      if (res.reg == 0.0) {
        res.ill_posed_warning = true;
        ++it;
        break;
      }
    }
    z = r.cwiseQuotient(d);
    const double rz_new = r.dot(z);
    const double beta = rz_new / rz;
    betas.push_back(beta);
    rz = rz_new;
    p = z + beta * p;
  }
  res.iterations = it;
  res.gradient_rel = (b - op(x)).norm() / bnorm;
  if (!converged && !res.ill_posed_warning)
    throw NoConvergence("normal-equation CG stopped after " + std::to_string(it) + " iterations, gradient " +
                        std::to_string(res.gradient_rel));
  // Lanczos tridiagonal of the preconditioned operator from the CG coefficients
  const std::size_t nl = std::min<std::size_t>(alphas.size(), 3000);
  std::vector<double> td(nl), to(nl > 0 ? nl - 1 : 0);
  for (std::size_t k = 0; k < nl; ++k) {
    td[k] = 1.0 / alphas[k] + (k > 0 ? betas[k - 1] / alphas[k - 1] : 0.0);
    if (k + 1 < nl) to[k] = std::sqrt(betas[k]) / alphas[k];
  }
  res.ritz_min = tridiagonal_extreme(td, to, true);
  res.ritz_max = tridiagonal_extreme(td, to, false);
  res.w = wb + x;
  return res;
}

SpectrumEstimate normal_operator_spectrum(const LinearizedSystem& sys, int steps, unsigned seed) {
  const Eigen::VectorXd mask = free_mask(sys);
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(sys.unknown_size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
  v = v.cwiseProduct(mask);
  v /= v.norm();
  Eigen::VectorXd vprev = Eigen::VectorXd::Zero(v.size());
  std::vector<double> a, b;
  double beta = 0.0;
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd u = mask.cwiseProduct(apply_linearized_transpose(sys, apply_linearized(sys, v)));
    const double alpha = v.dot(u);
    a.push_back(alpha);
    u -= alpha * v + beta * vprev;
    beta = u.norm();
    if (beta <= 1e-14 * std::abs(alpha)) break;
    b.push_back(beta);
    vprev = v;
    v = u / beta;
  }
  if (b.size() >= a.size()) b.resize(a.size() - 1);
  SpectrumEstimate out;
  out.steps = static_cast<int>(a.size());
  out.lambda_min = tridiagonal_extreme(a, b, true);
  out.lambda_max = tridiagonal_extreme(a, b, false);
  out.sigma_min = std::sqrt(std::max(out.lambda_min, 0.0));
  return out;
}

Eigen::VectorXd nonlinear_residual(const Medium& m, const std::vector<VectorField>& E,
                                   const std::vector<Eigen::VectorXd>& H) {
  if (E.size() != H.size()) throw GridMismatch("nonlinear_residual: data count");
  const LinearizedSystem layout = make_linearized_system(m, E);
  const std::size_t N = layout.nodes();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(layout.row_size());
  for (std::size_t j = 0; j < E.size(); ++j) {
    if (static_cast<std::size_t>(H[j].size()) != N) throw GridMismatch("nonlinear_residual: data size");
    const VectorField M = apply_elliptic_form(m, E[j]);
    store_complex(r, layout.maxwell_offset(j), M.values);
    store_complex(r, layout.conj_offset(j), M.values.conjugate());
    const Eigen::VectorXd h = squared_magnitude(E[j]).cwiseProduct(m.sigma) - H[j];
    r.segment(layout.data_offset(j), N) = stencil::laplacian(m.grid, h);
  }
  return r;
}

namespace {

bool on_trace_layers(const Grid& g, std::size_t p) {
  const auto ijk = g.unravel(p);
  return g.boundary_distance(ijk[0], ijk[1], ijk[2]) < kTraceLayers;
}

void project(Medium& m, double n_floor) {
  m.n = m.n.cwiseMax(n_floor);
  m.sigma = m.sigma.cwiseMax(0.0);
}

struct State {
  Medium m;
  std::vector<VectorField> E;
};

State step(const State& s, const Perturbation& w, double t, double n_floor) {
  State out = s;
  for (std::size_t j = 0; j < s.E.size(); ++j) out.E[j].values += t * w.dE[j].values;
  out.m.sigma += t * w.dsigma;
  out.m.n += t * w.dn;
  project(out.m, n_floor);
  return out;
}

}  // namespace

ReconstructionResult gauss_newton(const InternalData& data, const Medium& init,
                                  const std::vector<BoundaryIllumination>& illum, const GaussNewtonConfig& cfg) {
  check_admissible(init, cfg.n_floor);
  require_same_grid(data.grid, init.grid, "gauss_newton");
  if (data.H.size() != illum.size()) throw ParamError("gauss_newton: data and illumination counts differ");
  const Grid& g = init.grid;
  State s{init, solve_forward(init, illum, cfg.forward)};
  if (cfg.boundary_fields) {
    if (cfg.boundary_fields->size() != illum.size()) throw ParamError("gauss_newton: boundary field count");
    for (std::size_t j = 0; j < illum.size(); ++j) {
      require_same_grid(g, (*cfg.boundary_fields)[j].grid, "gauss_newton boundary fields");
      for (std::size_t p = 0; p < g.size(); ++p)
        if (on_trace_layers(g, p)) s.E[j].set(p, (*cfg.boundary_fields)[j].at(p));
    }
  }
  const std::vector<VectorField> traces = s.E;

  double scale = 0.0;
  for (const auto& h : data.H) scale += stencil::laplacian(g, h).squaredNorm();
  scale = scale > 0.0 ? std::sqrt(scale) : 1.0;

  ReconstructionResult out;
  Eigen::VectorXd r = nonlinear_residual(s.m, s.E, data.H);
  double phi = 0.5 * r.squaredNorm();
  out.residual_history.push_back(r.norm() / scale);
  int growth = 0;
  for (int it = 0; it < cfg.max_iter; ++it) {
    if (out.residual_history.back() <= cfg.tol) break;
    LinearizedSystem sys = make_linearized_system(s.m, s.E);
    sys.freeze_dn = cfg.freeze_dn;
    const NormalSolveResult ns = normal_solve(sys, -r, zero_traces(sys), cfg.inner);
    const Perturbation w = unpack(sys, ns.w);
    ++out.iterations;
    if (cfg.linear) {
      out.delta_sigma = w.dsigma;
      out.delta_n = w.dn;
      s = step(s, w, 1.0, cfg.n_floor);
      r = nonlinear_residual(s.m, s.E, data.H);
      out.residual_history.push_back(r.norm() / scale);
      break;
    }
    const double slope = apply_linearized(sys, ns.w).dot(r);
    double t = 1.0;
    State trial;
    Eigen::VectorXd rt;
    double phit = 0.0;
    for (int k = 0; k <= cfg.max_halvings; ++k, t *= 0.5) {
      trial = step(s, w, t, cfg.n_floor);
      rt = nonlinear_residual(trial.m, trial.E, data.H);
      phit = 0.5 * rt.squaredNorm();
      if (phit <= phi + cfg.armijo * t * slope) break;
    }
    growth = phit > phi ? growth + 1 : 0;
    if (growth >= cfg.max_growth)
      throw Divergence("residual grew for " + std::to_string(growth) + " consecutive damped steps");
    const double decrease = (phi - phit) / phi;
    s = std::move(trial);
    r = std::move(rt);
    phi = phit;
    out.residual_history.push_back(r.norm() / scale);
    if (decrease >= 0.0 && decrease < cfg.stagnation) break;
  }
  if (!cfg.linear) {
    out.delta_sigma = s.m.sigma - init.sigma;
    out.delta_n = s.m.n - init.n;
  }
  // forward fields of the reconstruction against the imposed traces
  SolverConfig fc = cfg.forward;
  fc.check_resolution = false;
  const auto Ef = solve_forward(s.m, illum, fc);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < illum.size(); ++j)
    for (std::size_t p = 0; p < g.size(); ++p) {
      if (!on_trace_layers(g, p)) continue;
      num += (Ef[j].at(p) - traces[j].at(p)).squaredNorm();
      den += traces[j].at(p).squaredNorm();
    }
  out.boundary_mismatch = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
  out.medium = std::move(s.m);
  out.E = std::move(s.E);
  return out;
}

double relative_error(const Medium& recon, const Medium& truth) {
  require_same_grid(recon.grid, truth.grid, "relative_error");
  const double num = (recon.sigma - truth.sigma).squaredNorm() + (recon.n - truth.n).squaredNorm();
  const double den = truth.sigma.squaredNorm() + truth.n.squaredNorm();
  return std::sqrt(num / den);
}

namespace {

// Even reflection along each axis of length n_a to period 2(n_a - 1).
int reflect(int i, int n) {
  const int P = 2 * (n - 1);
  i %= P;
  return i < n ? i : P - i;
}

double weighted_norm(const FftBox& box, Eigen::VectorXcd f, double order, double cell) {
  box.forward(f, FftBox::kPeriodic);
  double acc = 0.0;
  for (std::size_t idx = 0; idx < box.size(); ++idx)
    acc += std::pow(1.0 + box.xi(idx, FftBox::kPeriodic).squaredNorm(), order) * std::norm(f[idx]);
  return std::sqrt(cell * acc / static_cast<double>(box.size()));
}

}  // namespace

double sobolev_norm(const Grid& g, const Eigen::VectorXd& f, double order) {
  if (static_cast<std::size_t>(f.size()) != g.size()) throw GridMismatch("sobolev_norm: size");
  const std::array<int, 3> P{2 * (g.dims[0] - 1), 2 * (g.dims[1] - 1), 2 * (g.dims[2] - 1)};
  FftBox box(P, g.spacing);
  Eigen::VectorXcd ext(box.size());
  for (int i = 0; i < P[0]; ++i)
    for (int j = 0; j < P[1]; ++j)
      for (int k = 0; k < P[2]; ++k)
        ext[box.index(i, j, k)] = f[g.index(reflect(i, g.dims[0]), reflect(j, g.dims[1]), reflect(k, g.dims[2]))];
  const double h = g.spacing;
  return weighted_norm(box, std::move(ext), order, h * h * h / 8.0);
}

double trace_sobolev_norm(const Grid& g, const Eigen::VectorXd& f, double order) {
  if (static_cast<std::size_t>(f.size()) != g.size()) throw GridMismatch("trace_sobolev_norm: size");
  double acc = 0.0;
  for (int face = 0; face < 6; ++face) {
    const auto ax = face_axes(face);
    const int nu = g.dims[ax[0]], nv = g.dims[ax[1]];
    FftBox box({2 * (nu - 1), 2 * (nv - 1), 1}, g.spacing);
    Eigen::VectorXcd ext(box.size());
    for (int u = 0; u < 2 * (nu - 1); ++u)
      for (int v = 0; v < 2 * (nv - 1); ++v)
        ext[box.index(u, v, 0)] = f[face_node_to_grid(g, face, reflect(u, nu), reflect(v, nv))];
    const double n = weighted_norm(box, std::move(ext), order, g.spacing * g.spacing / 4.0);
    acc += n * n;
  }
  return std::sqrt(acc);
}

std::vector<SobolevRow> stability_report(const StabilityInputs& in) {
  auto stack = [&](const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b, double order,
                   bool trace) {
    if (a.size() != b.size()) throw GridMismatch("stability_report: paired list sizes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const Eigen::VectorXd d = a[i] - b[i];
      const double n = trace ? trace_sobolev_norm(in.grid, d, order) : sobolev_norm(in.grid, d, order);
      acc += n * n;
    }
    return std::sqrt(acc);
  };
  std::vector<SobolevRow> rows;
  for (int s = 0; s <= 2; ++s) {
    SobolevRow row;
    row.order = s;
    row.lhs = stack(in.unknowns_a, in.unknowns_b, s, false);
    row.data = stack(in.data_a, in.data_b, s, false);
    row.trace_value = stack(in.value_a, in.value_b, s - 0.5, true);
    row.trace_normal = stack(in.normal_a, in.normal_b, s - 1.5, true);
    const double rhs = row.data + row.trace_value + row.trace_normal;
    row.ratio = rhs > 0.0 ? row.lhs / rhs : (row.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    rows.push_back(row);
  }
  return rows;
}

std::vector<Eigen::VectorXd> unknown_fields(const Medium& m, const std::vector<VectorField>& E) {
  std::vector<Eigen::VectorXd> out{m.sigma, m.n};
  const auto N = static_cast<Eigen::Index>(m.grid.size());
  for (const auto& e : E)
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd re(N), im(N);
      for (Eigen::Index p = 0; p < N; ++p) {
        re[p] = e.values[3 * p + c].real();
        im[p] = e.values[3 * p + c].imag();
      }
      out.push_back(std::move(re));
      out.push_back(std::move(im));
    }
  return out;
}

Eigen::VectorXd normal_difference(const Grid& g, const Eigen::VectorXd& f) {
  if (static_cast<std::size_t>(f.size()) != g.size()) throw GridMismatch("normal_difference: size");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(f.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto ijk = g.unravel(p);
    const int a = face_axis(g, ijk);
    if (a < 0) continue;
    out[p] = (f[p] - f[p + inward(g, ijk, a)]) / g.spacing;
  }
  return out;
}

StabilityInputs stability_inputs(const Medium& a, const std::vector<VectorField>& Ea,
                                 const std::vector<Eigen::VectorXd>& Ha, const Medium& b,
                                 const std::vector<VectorField>& Eb, const std::vector<Eigen::VectorXd>& Hb) {
  require_same_grid(a.grid, b.grid, "stability_inputs");
  if (Ea.size() != Eb.size() || Ha.size() != Hb.size()) throw GridMismatch("stability_inputs: list sizes differ");
  StabilityInputs in;
  in.grid = a.grid;
  in.unknowns_a = unknown_fields(a, Ea);
  in.unknowns_b = unknown_fields(b, Eb);
  in.data_a = Ha;
  in.data_b = Hb;
  in.value_a = in.unknowns_a;
  in.value_b = in.unknowns_b;
  for (const auto& f : in.unknowns_a) in.normal_a.push_back(normal_difference(in.grid, f));
  for (const auto& f : in.unknowns_b) in.normal_b.push_back(normal_difference(in.grid, f));
  return in;
}

InternalData add_multiplicative_noise(const InternalData& d, double level, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  InternalData out = d;
  for (auto& h : out.H)
    for (Eigen::Index p = 0; p < h.size(); ++p) h[p] *= 1.0 + level * nd(rng);
  return out;
}

}  // namespace qtat
