#pragma once

#include <Eigen/Core>
#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "qtat/fields.hpp"
#include "qtat/grid.hpp"
#include "qtat/illum.hpp"
#include "qtat/medium.hpp"
#include "qtat/spectral.hpp"

namespace qtat {

enum class Differentiation { spectral, centered };

struct CgoOptions {
  double tol = 1e-10;       // series stops when a term falls below tol relative to the first
  int m_cap = 200;
  bool far_field_q = true;  // Q = i zeta x eta + decaying part
  Differentiation diff = Differentiation::spectral;
  double theta = -0.55;     // weight <x>^theta for term norms
  double denom_floor_rel = 1e-6;
  int collar = 2;
  double box_factor = 2.0;
  std::optional<Vec3d> phase_origin;  // default: grid center
};

// Medium grid embedded in a periodic box of side box_factor times the medium box.
struct CgoBox {
  Grid grid;
  std::shared_ptr<const FftBox> fft;
  std::array<int, 3> offset{};
  Vec3d origin = Vec3d::Zero();  // physical coordinate of box index (0,0,0)

  std::size_t box_index(std::size_t node) const;
  Vec3d coord(std::size_t box_idx) const;
  Vec3d center() const;
};

CgoBox make_cgo_box(const Grid& g, double box_factor = 2.0);
Eigen::VectorXcd embed(const CgoBox& b, const Eigen::VectorXcd& on_grid, cplx fill);
Eigen::VectorXcd restrict_to_grid(const CgoBox& b, const Eigen::VectorXcd& on_box);

struct FaddeevKernel {
  Vec3c zeta = Vec3c::Zero();
  std::array<double, 3> box_length{};
  std::array<int, 3> dims{};
  int shift_axis = FftBox::kPeriodic;
  Eigen::VectorXcd denom;  // xi.xi + 2 zeta.xi on the (shifted) lattice
  double min_denom = 0.0;
  double denom_floor = 0.0;
};

// Axis of largest |Im zeta_a|; the half-step shift along it keeps the lattice
// off the resonance set.
int resonance_axis(const Vec3c& zeta);

// Throws ResonanceError if min |denom| <= floor_rel |zeta|^2.
FaddeevKernel faddeev_kernel(const FftBox& box, const Vec3c& zeta, int shift_axis, double floor_rel = 1e-6);
Eigen::VectorXcd faddeev_apply(const FftBox& box, const FaddeevKernel& G, const Eigen::VectorXcd& f);
BoxVec faddeev_apply(const FftBox& box, const FaddeevKernel& G, const BoxVec& f);

struct AlphaQ {
  double n_c = 1.0;
  double k = 0.0;
  Eigen::VectorXcd gamma0, gamma_half, gamma_mhalf;  // on the box, principal branch
  BoxVec alpha;                                     // grad gamma0 / gamma0
  std::array<Eigen::VectorXcd, 9> grad_alpha;       // [3*i + j] = d_i alpha_j
  Eigen::VectorXcd frak_q;                          // alpha.alpha/4 + div(alpha)/2
};

// Background index n_c read off the collar; SupportError if gamma0 - 1 reaches it.
double background_n(const Medium& m, int collar);
AlphaQ build_alpha_q(const Medium& m, const CgoBox& box, Differentiation diff = Differentiation::spectral,
                     int collar = 2);

struct RemainderPair {
  BoxVec R;  // shifted lattice
  BoxVec Q;  // 2-form as its Hodge vector
  int series_terms = 0;
  double tail_norm = 0.0;           // last term norm / first term norm
  std::vector<double> term_norms;   // weighted ||R_m|| + ||Q_m||
  bool far_field_q = true;
};

struct CgoSolution {
  CgoBox box;
  AlphaQ aq;
  CgoParams params;
  FaddeevKernel kernel;
  RemainderPair rq;
  Vec3d phase_origin = Vec3d::Zero();
  VectorField E;
  double min_abs_E = 0.0;
};

CgoSolution cgo_solve(const Medium& m, const CgoParams& p, const CgoOptions& opt = {});
RemainderPair neumann_series_RQ(const Medium& m, const CgoParams& p, const CgoOptions& opt = {});
VectorField cgo_field(const Medium& m, const CgoParams& p, const CgoOptions& opt = {});

// Relative residual of -curl curl E + q0 E = 0 in the frame E = e^{ix.zeta} u,
// on nodes at least `collar` from the boundary; normalized by ||q0 u||.
double cgo_residual(const CgoSolution& sol, int collar = 2);
// || Q - (curl + i zeta x)(gamma0^{-1/2}(eta + R)) || / ||Q|| on the same nodes.
double cgo_q_consistency(const CgoSolution& sol, int collar = 2);
// L2 norm of R over the medium grid (h^3 weighted).
double remainder_norm(const CgoSolution& sol);

struct DecayRow {
  double s = 0.0;
  double zeta_norm = 0.0;
  double eta_norm = 0.0;
  double r_norm = 0.0;
  double scaled = 0.0;  // r_norm * |zeta| / |eta|
  double residual = 0.0;
  int terms = 0;
};

struct DecayStudy {
  std::vector<DecayRow> rows;
  double slope = 0.0;  // of log(r_norm/|eta|) against log|zeta|
};

DecayStudy decay_study(const Medium& m, const Vec3d& rho, const Vec3d& rho_perp, const std::vector<double>& s_list,
                       const CgoOptions& opt = {});

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qtat
