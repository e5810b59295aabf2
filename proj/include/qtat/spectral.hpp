#pragma once

#include <Eigen/Core>
#include <array>
#include <memory>

#include "qtat/fields.hpp"

namespace qtat {

// Periodic P0 x P1 x P2 box with spacing h and FFTW plans. Fields are flat
// vectors in row-major (i, j, k) order. A lattice may be shifted by half a
// step along one axis: such fields are antiperiodic along that axis.
class FftBox {
 public:
  static constexpr int kPeriodic = -1;

  FftBox(std::array<int, 3> dims, double h);
  ~FftBox();
  FftBox(const FftBox&) = delete;
  FftBox& operator=(const FftBox&) = delete;
  FftBox(FftBox&&) noexcept;
  FftBox& operator=(FftBox&&) noexcept;

  const std::array<int, 3>& dims() const { return dims_; }
  std::size_t size() const { return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]; }
  double h() const { return h_; }
  double length(int axis) const { return dims_[axis] * h_; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
  }

  // Angular frequency of mode m on `axis`; shift_axis selects the half-step lattice.
  double freq(int axis, int m, int shift_axis) const;
  Vec3d xi(std::size_t idx, int shift_axis) const;

  // Unnormalized forward, normalized inverse; in place. For shifted lattices
  // the half-step phase is applied around the transform.
  void forward(Eigen::VectorXcd& f, int shift_axis) const;
  void inverse(Eigen::VectorXcd& f, int shift_axis) const;

  // d/dx_axis by multiplication with i xi_axis (Nyquist mode dropped on periodic axes).
  Eigen::VectorXcd derivative(const Eigen::VectorXcd& f, int axis, int shift_axis) const;
  Eigen::VectorXcd laplacian(const Eigen::VectorXcd& f, int shift_axis) const;

 private:
  void phase(Eigen::VectorXcd& f, int shift_axis, double sign) const;
  std::array<int, 3> dims_;
  double h_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

using BoxVec = std::array<Eigen::VectorXcd, 3>;

}  // namespace qtat
