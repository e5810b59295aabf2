#include "qtat/stencil.hpp"

namespace qtat::stencil {

namespace {

template <class F>
void for_interior(const Grid& g, F&& f) {
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
#pragma omp parallel for schedule(static)
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 1; j < ny - 1; ++j)
      for (int k = 1; k < nz - 1; ++k) f(g.index(i, j, k));
}

}  // namespace

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> laplacian(const Grid& g, const Eigen::Matrix<S, Eigen::Dynamic, 1>& u) {
  Eigen::Matrix<S, Eigen::Dynamic, 1> out = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(u.size());
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for_interior(g, [&](std::size_t p) {
    S acc = -6.0 * u[p];
    for (int a = 0; a < 3; ++a) acc += u[p + st[a]] + u[p - st[a]];
    out[p] = acc * ih2;
  });
  return out;
}

template Eigen::VectorXd laplacian<double>(const Grid&, const Eigen::VectorXd&);
template Eigen::VectorXcd laplacian<cplx>(const Grid&, const Eigen::VectorXcd&);

Eigen::VectorXcd laplacian3(const Grid& g, const Eigen::VectorXcd& E) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(E.size());
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for_interior(g, [&](std::size_t p) {
    for (int c = 0; c < 3; ++c) {
      cplx acc = -6.0 * E[3 * p + c];
      for (int a = 0; a < 3; ++a) acc += E[3 * (p + st[a]) + c] + E[3 * (p - st[a]) + c];
      out[3 * p + c] = acc * ih2;
    }
  });
  return out;
}

namespace {

// D_ab applied to component b of E at node p.
inline cplx mixed(const Eigen::VectorXcd& E, std::size_t p, std::ptrdiff_t sa, std::ptrdiff_t sb, int b) {
  return E[3 * (p + sa + sb) + b] - E[3 * (p + sa - sb) + b] - E[3 * (p - sa + sb) + b] +
         E[3 * (p - sa - sb) + b];
}

inline cplx second(const Eigen::VectorXcd& E, std::size_t p, std::ptrdiff_t sa, int b) {
  return E[3 * (p + sa) + b] - 2.0 * E[3 * p + b] + E[3 * (p - sa) + b];
}

}  // namespace

Eigen::VectorXcd grad_div(const Grid& g, const Eigen::VectorXcd& E) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(E.size());
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for_interior(g, [&](std::size_t p) {
    for (int a = 0; a < 3; ++a) {
      cplx acc = second(E, p, st[a], a);
      for (int b = 0; b < 3; ++b)
        if (b != a) acc += 0.25 * mixed(E, p, st[a], st[b], b);
      out[3 * p + a] = acc * ih2;
    }
  });
  return out;
}

Eigen::VectorXcd neg_curl_curl(const Grid& g, const Eigen::VectorXcd& E) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(E.size());
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for_interior(g, [&](std::size_t p) {
    for (int a = 0; a < 3; ++a) {
      cplx acc = 0.0;
      for (int b = 0; b < 3; ++b) {
        if (b == a) continue;
        acc += second(E, p, st[b], a) - 0.25 * mixed(E, p, st[a], st[b], b);
      }
      out[3 * p + a] = acc * ih2;
    }
  });
  return out;
}

}  // namespace qtat::stencil
