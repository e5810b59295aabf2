#include "qtat/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>

#include "qtat/errors.hpp"

namespace qtat {

struct FftBox::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  ~Plans() {
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
  }
};

FftBox::FftBox(std::array<int, 3> dims, double h) : dims_(dims), h_(h), plans_(std::make_unique<Plans>()) {
  for (int d : dims)
    if (d < 1) throw ParamError("FFT box dimensions must be positive");
  if (!(h > 0.0)) throw ParamError("FFT box spacing must be positive");
  Eigen::VectorXcd buf(size());
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->fwd = fftw_plan_dft_3d(dims[0], dims[1], dims[2], p, p, FFTW_FORWARD, flags);
  plans_->inv = fftw_plan_dft_3d(dims[0], dims[1], dims[2], p, p, FFTW_BACKWARD, flags);
  if (!plans_->fwd || !plans_->inv) throw Error("FFTW plan creation failed");
}

FftBox::~FftBox() = default;
FftBox::FftBox(FftBox&&) noexcept = default;
FftBox& FftBox::operator=(FftBox&&) noexcept = default;

double FftBox::freq(int axis, int m, int shift_axis) const {
  const int P = dims_[axis];
  const int ms = m < (P + 1) / 2 ? m : m - P;
  const double shift = axis == shift_axis ? 0.5 : 0.0;
  return 2.0 * std::numbers::pi * (ms + shift) / length(axis);
}

Vec3d FftBox::xi(std::size_t idx, int shift_axis) const {
  const int k = static_cast<int>(idx % dims_[2]);
  const int j = static_cast<int>((idx / dims_[2]) % dims_[1]);
  const int i = static_cast<int>(idx / (static_cast<std::size_t>(dims_[2]) * dims_[1]));
  return Vec3d(freq(0, i, shift_axis), freq(1, j, shift_axis), freq(2, k, shift_axis));
}

void FftBox::phase(Eigen::VectorXcd& f, int shift_axis, double sign) const {
  if (shift_axis == kPeriodic) return;
  const int P = dims_[shift_axis];
  std::vector<cplx> ph(P);
  for (int b = 0; b < P; ++b) ph[b] = std::polar(1.0, sign * std::numbers::pi * b / P);
  const std::size_t stride = shift_axis == 0 ? static_cast<std::size_t>(dims_[1]) * dims_[2]
                             : shift_axis == 1 ? static_cast<std::size_t>(dims_[2])
                                               : 1;
  const auto n = static_cast<std::ptrdiff_t>(size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < n; ++idx) f[idx] *= ph[(idx / stride) % P];
}

void FftBox::forward(Eigen::VectorXcd& f, int shift_axis) const {
  if (static_cast<std::size_t>(f.size()) != size()) throw GridMismatch("field does not match FFT box");
  phase(f, shift_axis, -1.0);
  auto* p = reinterpret_cast<fftw_complex*>(f.data());
  fftw_execute_dft(plans_->fwd, p, p);
}

void FftBox::inverse(Eigen::VectorXcd& f, int shift_axis) const {
  if (static_cast<std::size_t>(f.size()) != size()) throw GridMismatch("field does not match FFT box");
  auto* p = reinterpret_cast<fftw_complex*>(f.data());
  fftw_execute_dft(plans_->inv, p, p);
  f /= static_cast<double>(size());
  phase(f, shift_axis, 1.0);
}

Eigen::VectorXcd FftBox::derivative(const Eigen::VectorXcd& f, int axis, int shift_axis) const {
  Eigen::VectorXcd g = f;
  forward(g, shift_axis);
  const auto n = static_cast<std::ptrdiff_t>(size());
  const int P = dims_[axis];
  const bool drop_nyquist = axis != shift_axis && P % 2 == 0;
  const std::size_t stride = axis == 0 ? static_cast<std::size_t>(dims_[1]) * dims_[2]
                             : axis == 1 ? static_cast<std::size_t>(dims_[2])
                                         : 1;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
    const bool nyq = drop_nyquist && static_cast<int>((idx / stride) % P) == P / 2;
    g[idx] *= nyq ? cplx(0.0) : cplx(0.0, xi(idx, shift_axis)[axis]);
  }
  inverse(g, shift_axis);
  return g;
}

Eigen::VectorXcd FftBox::laplacian(const Eigen::VectorXcd& f, int shift_axis) const {
  Eigen::VectorXcd g = f;
  forward(g, shift_axis);
  const auto n = static_cast<std::ptrdiff_t>(size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < n; ++idx) g[idx] *= -xi(idx, shift_axis).squaredNorm();
  inverse(g, shift_axis);
  return g;
}

}  // namespace qtat
