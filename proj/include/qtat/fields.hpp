#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <complex>

#include "qtat/grid.hpp"

namespace qtat {

using cplx = std::complex<double>;
using Vec3d = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;

// Bilinear cross product and dot product. Eigen's cross() conjugates for
// complex scalars, which is not what the form calculus needs.
template <class A, class B>
auto cross(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using S = decltype(a.coeff(0) * b.coeff(0));
  return Eigen::Matrix<S, 3, 1>(a.coeff(1) * b.coeff(2) - a.coeff(2) * b.coeff(1),
                                a.coeff(2) * b.coeff(0) - a.coeff(0) * b.coeff(2),
                                a.coeff(0) * b.coeff(1) - a.coeff(1) * b.coeff(0));
}

template <class A, class B>
auto bdot(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.coeff(0) * b.coeff(0) + a.coeff(1) * b.coeff(1) + a.coeff(2) * b.coeff(2);
}

// Node-major complex 3-vector field: values[3*node + component].
struct VectorField {
  Grid grid;
  Eigen::VectorXcd values;

  VectorField() = default;
  explicit VectorField(const Grid& g) : grid(g), values(Eigen::VectorXcd::Zero(3 * g.size())) {}
  VectorField(const Grid& g, Eigen::VectorXcd v);

  Vec3c at(std::size_t node) const { return values.segment<3>(3 * node); }
  void set(std::size_t node, const Vec3c& v) { values.segment<3>(3 * node) = v; }
  std::size_t nodes() const { return grid.size(); }
};

Eigen::VectorXd squared_magnitude(const VectorField& E);

}  // namespace qtat
