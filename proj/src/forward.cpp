#include "qtat/forward.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "qtat/errors.hpp"
#include "qtat/stencil.hpp"

namespace qtat {

Vec3d face_normal(int face) {
  Vec3d nu = Vec3d::Zero();
  nu[face / 2] = (face % 2 == 0) ? -1.0 : 1.0;
  return nu;
}

std::array<int, 2> face_axes(int face) {
  switch (face / 2) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

int face_node_count(const Grid& g, int face) {
  const auto ax = face_axes(face);
  return g.dims[ax[0]] * g.dims[ax[1]];
}

std::size_t face_node_to_grid(const Grid& g, int face, int u, int v) {
  const int a = face / 2;
  const auto ax = face_axes(face);
  std::array<int, 3> p{};
  p[a] = (face % 2 == 0) ? 0 : g.dims[a] - 1;
  p[ax[0]] = u;
  p[ax[1]] = v;
  return g.index(p[0], p[1], p[2]);
}

Vec3c BoundaryIllumination::value(int face, int u, int v) const {
  const auto ax = face_axes(face);
  const std::size_t s = static_cast<std::size_t>(u) * grid.dims[ax[1]] + v;
  return faces[face].segment<3>(3 * s);
}

Vec3c BoundaryIllumination::tangential(int face, int u, int v) const {
  const Vec3c f = value(face, u, v);
  const Vec3c nu = face_normal(face).cast<cplx>();
  return cross(f, nu);
}

void check_tangent(const BoundaryIllumination& f, double rel_tol) {
  double scale = 0.0, worst = 0.0;
  for (int face = 0; face < 6; ++face) {
    if (f.faces[face].size() != 3 * face_node_count(f.grid, face))
      throw GridMismatch("boundary illumination face size mismatch");
    const int a = face / 2;
    for (Eigen::Index s = 0; s < f.faces[face].size() / 3; ++s) {
      scale = std::max(scale, f.faces[face].segment<3>(3 * s).norm());
      worst = std::max(worst, std::abs(f.faces[face][3 * s + a]));
    }
  }
  if (worst > rel_tol * std::max(scale, 1e-300) && worst > 0.0)
    throw ParamError("boundary illumination has a normal component");
}

BoundaryIllumination zero_illumination(const Grid& g) {
  BoundaryIllumination f{g, {}};
  for (int face = 0; face < 6; ++face) f.faces[face] = Eigen::VectorXcd::Zero(3 * face_node_count(g, face));
  return f;
}

BoundaryIllumination operator+(const BoundaryIllumination& a, const BoundaryIllumination& b) {
  require_same_grid(a.grid, b.grid, "illumination sum");
  BoundaryIllumination out = a;
  for (int face = 0; face < 6; ++face) out.faces[face] += b.faces[face];
  return out;
}

BoundaryIllumination operator*(cplx s, const BoundaryIllumination& a) {
  BoundaryIllumination out = a;
  for (int face = 0; face < 6; ++face) out.faces[face] *= s;
  return out;
}

VectorField apply_curl_curl(const Medium& m, const VectorField& E) {
  require_same_grid(m.grid, E.grid, "apply_curl_curl");
  const Eigen::VectorXcd q = eval_q(m);
  VectorField out(E.grid, stencil::neg_curl_curl(E.grid, E.values));
  const Grid& g = E.grid;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto [i, j, k] = g.unravel(p);
    if (g.on_boundary(i, j, k)) continue;
    out.values.segment<3>(3 * p) += q[p] * E.values.segment<3>(3 * p);
  }
  return out;
}

namespace {

constexpr double kQFloor = 1e-300;

// Visits the entries (column node, column component, coefficient) of the
// commutator part (1/q)[grad div, q] E of row (p, a). Each weight carries a
// factor q(y) - q(p), so the part vanishes identically for constant q.
template <class F>
void commutator_row(const Grid& g, const Eigen::VectorXcd& q, std::size_t p, int a, F&& emit) {
  const cplx qp = q[p];
  const cplx iq = 1.0 / qp;
  stencil::grad_div_neighbors(g, p, a, [&](std::size_t y, int b, double w) { emit(y, b, w * (q[y] - qp) * iq); });
}

// Full row of Lap E + q E + (1/q)[grad div, q] E.
template <class F>
void elliptic_row(const Grid& g, const Eigen::VectorXcd& q, std::size_t p, int a, F&& emit) {
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  emit(p, a, -6.0 * ih2 + q[p]);
  for (int c = 0; c < 3; ++c) {
    emit(p + st[c], a, cplx(ih2));
    emit(p - st[c], a, cplx(ih2));
  }
  commutator_row(g, q, p, a, emit);
}

// Row (p, a) of d/dq [Lap + q + (1/q)[grad div, q]] E in direction dq:
// dq E + (1/q) grad div(dq E) - (dq/q^2) grad div(q E), with the center
// weights cancelling.
cplx elliptic_dq_row(const Grid& g, const Eigen::VectorXcd& q, const Eigen::VectorXcd& dq,
                     const Eigen::VectorXcd& E, std::size_t p, int a) {
  const cplx qp = q[p], dqp = dq[p];
  cplx acc = 0.0;
  stencil::grad_div_neighbors(g, p, a, [&](std::size_t y, int b, double w) {
    acc += w * (dq[y] - q[y] * dqp / qp) * E[3 * y + b];
  });
  return dqp * E[3 * p + a] + acc / qp;
}

void check_q_floor(const Eigen::VectorXcd& q) {
  for (Eigen::Index p = 0; p < q.size(); ++p)
    if (std::abs(q[p]) < kQFloor) throw DivisionByZero("|q| below floor");
}

}  // namespace

VectorField apply_elliptic_form(const Medium& m, const VectorField& E) {
  require_same_grid(m.grid, E.grid, "apply_elliptic_form");
  const Eigen::VectorXcd q = eval_q(m);
  check_q_floor(q);
  const Grid& g = E.grid;
  VectorField out(g, stencil::laplacian3(g, E.values));
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
#pragma omp parallel for schedule(static)
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 1; j < ny - 1; ++j)
      for (int k = 1; k < nz - 1; ++k) {
        const std::size_t p = g.index(i, j, k);
        for (int a = 0; a < 3; ++a) {
          cplx acc = 0.0;
          commutator_row(g, q, p, a, [&](std::size_t y, int b, cplx w) { acc += w * E.values[3 * y + b]; });
          out.values[3 * p + a] += q[p] * E.values[3 * p + a] + acc;
        }
      }
  return out;
}

void check_resolution(const Medium& m) {
  const double nmax = m.n.maxCoeff();
  const double hmax = 2.0 * std::numbers::pi / (8.0 * m.omega * std::sqrt(nmax));
  if (m.grid.spacing > hmax)
    throw ResolutionError("grid spacing " + std::to_string(m.grid.spacing) +
                          " exceeds 1/8 wavelength (" + std::to_string(hmax) + ")");
}

namespace {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Trip = Eigen::Triplet<cplx>;

// Which face supplies the Dirichlet value of component c at boundary node
// (i,j,k); -1 if c is the normal component of the only face (div row).
int dirichlet_face(const Grid& g, const std::array<int, 3>& p, int c) {
  for (int a = 0; a < 3; ++a) {
    if (a == c) continue;
    if (p[a] == 0) return 2 * a;
    if (p[a] == g.dims[a] - 1) return 2 * a + 1;
  }
  return -1;
}

std::array<int, 2> face_uv(int face, const std::array<int, 3>& p) {
  const auto ax = face_axes(face);
  return {p[ax[0]], p[ax[1]]};
}

SpMat assemble(const Medium& m, const Eigen::VectorXcd& q) {
  const Grid& g = m.grid;
  const std::size_t N = g.size();
  const auto st = g.strides();
  const double h = g.spacing;
  const double h2 = h * h;
  std::vector<Trip> trips;
  trips.reserve(3 * N * 19);
  for (std::size_t p = 0; p < N; ++p) {
    const auto ijk = g.unravel(p);
    if (!g.on_boundary(ijk[0], ijk[1], ijk[2])) {
      for (int a = 0; a < 3; ++a) {
        const auto row = static_cast<int>(3 * p + a);
        elliptic_row(g, q, p, a, [&](std::size_t y, int b, cplx w) {
          if (w != cplx(0.0)) trips.emplace_back(row, static_cast<int>(3 * y + b), w * h2);
        });
      }
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      const auto row = static_cast<int>(3 * p + c);
      if (dirichlet_face(g, ijk, c) >= 0) {
        trips.emplace_back(row, row, 1.0);
        continue;
      }
      // single face with normal axis c: discrete div(qE) = 0, one-sided in c
      const bool lo = ijk[c] == 0;
      const std::ptrdiff_t in = lo ? st[c] : -st[c];
      const double sgn = lo ? 1.0 : -1.0;
      const double scale = h / std::abs(q[p]);
      const std::size_t p1 = p + in, p2 = p + 2 * in;
      trips.emplace_back(row, static_cast<int>(3 * p + c), scale * sgn * (-3.0) * q[p] / (2.0 * h));
      trips.emplace_back(row, static_cast<int>(3 * p1 + c), scale * sgn * 4.0 * q[p1] / (2.0 * h));
      trips.emplace_back(row, static_cast<int>(3 * p2 + c), scale * sgn * (-1.0) * q[p2] / (2.0 * h));
      for (int b = 0; b < 3; ++b) {
        if (b == c) continue;
        const std::size_t yp = p + st[b], ym = p - st[b];
        trips.emplace_back(row, static_cast<int>(3 * yp + b), scale * q[yp] / (2.0 * h));
        trips.emplace_back(row, static_cast<int>(3 * ym + b), -scale * q[ym] / (2.0 * h));
      }
    }
  }
  SpMat A(3 * N, 3 * N);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

Eigen::VectorXcd rhs_from(const BoundaryIllumination& f) {
  const Grid& g = f.grid;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(3 * g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto ijk = g.unravel(p);
    if (!g.on_boundary(ijk[0], ijk[1], ijk[2])) continue;
    for (int c = 0; c < 3; ++c) {
      const int face = dirichlet_face(g, ijk, c);
      if (face < 0) continue;
      const auto uv = face_uv(face, ijk);
      b[3 * p + c] = f.tangential(face, uv[0], uv[1])[c];
    }
  }
  return b;
}

std::vector<VectorField> solve_direct(const SpMat& A, const std::vector<Eigen::VectorXcd>& rhs, const Grid& g,
                                      std::vector<SolveReport>* reports) {
  Eigen::SparseMatrix<cplx> Ac = A;
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(Ac);
  if (lu.info() != Eigen::Success) throw NoConvergence("sparse LU factorization failed");
  std::vector<VectorField> out;
  if (reports) reports->clear();
  for (const auto& b : rhs) {
    Eigen::VectorXcd x = lu.solve(b);
    const double bn = b.norm();
    const double rel = bn > 0 ? (A * x - b).norm() / bn : (A * x).norm();
    if (reports) reports->push_back({1, rel, true});
    out.emplace_back(g, std::move(x));
  }
  return out;
}

std::vector<VectorField> solve_krylov(const SpMat& A, const std::vector<Eigen::VectorXcd>& rhs, const Grid& g,
                                      const SolverConfig& cfg, std::vector<SolveReport>* reports) {
  Eigen::BiCGSTAB<SpMat, Eigen::DiagonalPreconditioner<cplx>> solver;
  solver.setTolerance(cfg.tol);
  solver.setMaxIterations(cfg.max_iter);
  solver.compute(A);
  std::vector<VectorField> out;
  if (reports) reports->clear();
  for (const auto& b : rhs) {
    if (b.norm() == 0.0) {
      if (reports) reports->push_back({0, 0.0, false});
      out.emplace_back(g);
      continue;
    }
    Eigen::VectorXcd x = solver.solve(b);
    const double rel = (A * x - b).norm() / b.norm();
    if (solver.info() != Eigen::Success || !(rel <= 10.0 * cfg.tol))
      throw NoConvergence("BiCGSTAB stopped after " + std::to_string(solver.iterations()) +
                          " iterations, relative residual " + std::to_string(rel));
    if (reports) reports->push_back({static_cast<int>(solver.iterations()), rel, false});
    out.emplace_back(g, std::move(x));
  }
  return out;
}

std::vector<VectorField> solve_system(const Medium& m, const Eigen::VectorXcd& q,
                                      const std::vector<Eigen::VectorXcd>& rhs, const SolverConfig& cfg,
                                      std::vector<SolveReport>* reports) {
  const SpMat A = assemble(m, q);
  const int maxdim = *std::max_element(m.grid.dims.begin(), m.grid.dims.end());
  const bool may_direct = maxdim < cfg.direct_below;
  if (cfg.method == SolverConfig::Method::direct) {
    if (!may_direct) throw ParamError("direct solve limited to grids below " + std::to_string(cfg.direct_below));
    return solve_direct(A, rhs, m.grid, reports);
  }
  try {
    return solve_krylov(A, rhs, m.grid, cfg, reports);
  } catch (const NoConvergence&) {
    if (cfg.method == SolverConfig::Method::krylov || !may_direct) throw;
  }
  return solve_direct(A, rhs, m.grid, reports);
}

// Right side of the differentiated discrete system: -(dA[dq]) E, in the
// row scaling used by assemble(). The derivative of the face-row scale
// h/|q| multiplies the face residual of E and is dropped.
Eigen::VectorXcd derivative_rhs(const Grid& g, const Eigen::VectorXcd& q, const Eigen::VectorXcd& dq,
                                const VectorField& E) {
  const auto st = g.strides();
  const double h = g.spacing, h2 = h * h;
  const Eigen::VectorXcd& e = E.values;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(3 * g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto ijk = g.unravel(p);
    if (!g.on_boundary(ijk[0], ijk[1], ijk[2])) {
      for (int a = 0; a < 3; ++a)
        b[3 * p + a] = -h2 * elliptic_dq_row(g, q, dq, e, p, a);
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      if (dirichlet_face(g, ijk, c) >= 0) continue;
      const bool lo = ijk[c] == 0;
      const std::ptrdiff_t in = lo ? st[c] : -st[c];
      const double sgn = lo ? 1.0 : -1.0;
      const double scale = h / std::abs(q[p]);
      const std::size_t p1 = p + in, p2 = p + 2 * in;
      cplx acc = sgn * (-3.0 * dq[p] * e[3 * p + c] + 4.0 * dq[p1] * e[3 * p1 + c] - dq[p2] * e[3 * p2 + c]);
      for (int bb = 0; bb < 3; ++bb) {
        if (bb == c) continue;
        const std::size_t yp = p + st[bb], ym = p - st[bb];
        acc += dq[yp] * e[3 * yp + bb] - dq[ym] * e[3 * ym + bb];
      }
      b[3 * p + c] = -scale * acc / (2.0 * h);
    }
  }
  return b;
}

}  // namespace

std::vector<VectorField> solve_forward(const Medium& m, const std::vector<BoundaryIllumination>& fs,
                                       const SolverConfig& cfg, std::vector<SolveReport>* reports) {
  check_admissible(m);
  if (cfg.check_resolution) check_resolution(m);
  const Eigen::VectorXcd q = eval_q(m);
  check_q_floor(q);
  std::vector<Eigen::VectorXcd> rhs;
  for (const auto& f : fs) {
    require_same_grid(m.grid, f.grid, "solve_forward");
    check_tangent(f);
    rhs.push_back(rhs_from(f));
  }
  return solve_system(m, q, rhs, cfg, reports);
}

std::vector<VectorField> solve_forward_derivative(const Medium& m, const std::vector<VectorField>& E,
                                                  const Eigen::VectorXd& dsigma, const Eigen::VectorXd& dn,
                                                  const SolverConfig& cfg, std::vector<SolveReport>* reports) {
  check_admissible(m);
  if (cfg.check_resolution) check_resolution(m);
  const std::size_t N = m.grid.size();
  if (static_cast<std::size_t>(dsigma.size()) != N || static_cast<std::size_t>(dn.size()) != N)
    throw GridMismatch("solve_forward_derivative: perturbation size");
  const Eigen::VectorXcd q = eval_q(m);
  check_q_floor(q);
  const Eigen::VectorXcd dq = eval_dq(m.omega, dsigma, dn);
  std::vector<Eigen::VectorXcd> rhs;
  for (const auto& e : E) {
    require_same_grid(m.grid, e.grid, "solve_forward_derivative");
    rhs.push_back(derivative_rhs(m.grid, q, dq, e));
  }
  return solve_system(m, q, rhs, cfg, reports);
}

Eigen::VectorXcd eval_dq(double omega, const Eigen::VectorXd& dsigma, const Eigen::VectorXd& dn) {
  if (dsigma.size() != dn.size()) throw GridMismatch("eval_dq: sizes differ");
  Eigen::VectorXcd dq(dn.size());
  for (Eigen::Index p = 0; p < dn.size(); ++p) dq[p] = cplx(omega * omega * dn[p], omega * dsigma[p]);
  return dq;
}

VectorField apply_elliptic_form_dq(const Medium& m, const VectorField& E, const Eigen::VectorXcd& dq) {
  require_same_grid(m.grid, E.grid, "apply_elliptic_form_dq");
  const Eigen::VectorXcd q = eval_q(m);
  check_q_floor(q);
  const Grid& g = E.grid;
  VectorField out(g);
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
#pragma omp parallel for schedule(static)
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 1; j < ny - 1; ++j)
      for (int k = 1; k < nz - 1; ++k) {
        const std::size_t p = g.index(i, j, k);
        for (int a = 0; a < 3; ++a) out.values[3 * p + a] = elliptic_dq_row(g, q, dq, E.values, p, a);
      }
  return out;
}

VectorField solve_forward(const Medium& m, const BoundaryIllumination& f, const SolverConfig& cfg,
                          SolveReport* report) {
  std::vector<SolveReport> reps;
  auto out = solve_forward(m, std::vector<BoundaryIllumination>{f}, cfg, &reps);
  if (report) *report = reps.front();
  return std::move(out.front());
}

Eigen::VectorXd internal_data(const Eigen::VectorXd& sigma, const VectorField& E) {
  if (sigma.size() != static_cast<Eigen::Index>(E.nodes())) throw GridMismatch("internal_data shapes differ");
  Eigen::VectorXd H = squared_magnitude(E);
  return H.cwiseProduct(sigma);
}

InternalData internal_data(const Eigen::VectorXd& sigma, const std::vector<VectorField>& E) {
  InternalData d;
  if (E.empty()) throw ParamError("internal_data needs at least one field");
  d.grid = E.front().grid;
  for (const auto& e : E) {
    require_same_grid(d.grid, e.grid, "internal_data");
    d.H.push_back(internal_data(sigma, e));
  }
  return d;
}

}  // namespace qtat
