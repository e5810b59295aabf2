#pragma once

// Second-order node-collocated difference operators. Output is defined on
// nodes with boundary distance >= 1 and zero on the boundary.

#include <Eigen/Core>

#include "qtat/fields.hpp"
#include "qtat/grid.hpp"

namespace qtat::stencil {

// Scalar Laplacian (7-point).
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> laplacian(const Grid& g, const Eigen::Matrix<S, Eigen::Dynamic, 1>& u);

// Componentwise Laplacian of a node-major 3-vector field.
Eigen::VectorXcd laplacian3(const Grid& g, const Eigen::VectorXcd& E);

// grad(div E): compact second differences on the diagonal, 4-corner mixed
// differences off it.
Eigen::VectorXcd grad_div(const Grid& g, const Eigen::VectorXcd& E);

// -curl curl E built from the same stencils as grad_div, so that
// laplacian3 - grad_div == neg_curl_curl holds exactly.
Eigen::VectorXcd neg_curl_curl(const Grid& g, const Eigen::VectorXcd& E);

// Off-center entries of row (p, a) of grad div: calls emit(y, b, w) for
// every neighbor y != p and component b. The center weight is -2/h^2 on b = a.
template <class F>
inline void grad_div_neighbors(const Grid& g, std::size_t p, int a, F&& emit) {
  const auto st = g.strides();
  const double ih2 = 1.0 / (g.spacing * g.spacing);
  for (int sgn : {1, -1}) emit(p + sgn * st[a], a, ih2);
  for (int b = 0; b < 3; ++b) {
    if (b == a) continue;
    for (int s1 : {1, -1})
      for (int s2 : {1, -1}) emit(p + s1 * st[a] + s2 * st[b], b, 0.25 * ih2 * s1 * s2);
  }
}

// Interior mask helpers.
inline bool interior(const Grid& g, int i, int j, int k, int layers = 1) {
  return g.boundary_distance(i, j, k) >= layers;
}

}  // namespace qtat::stencil
