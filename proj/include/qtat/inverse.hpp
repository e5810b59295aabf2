#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "qtat/fields.hpp"
#include "qtat/forward.hpp"
#include "qtat/medium.hpp"

namespace qtat {

// Outer node layers held fixed by the Dirichlet and normal traces.
inline constexpr int kTraceLayers = 2;

// sigma (dE . E* + E . dE*) + dsigma |E|^2.
Eigen::VectorXd frechet_dH(const Eigen::VectorXd& sigma, const VectorField& E, const VectorField& dE,
                           const Eigen::VectorXd& dsigma);

// w = (dE_1, ..., dE_J, dsigma, dn). Flat layout: per illumination 6 reals
// per node (Re/Im of each component), then dsigma, then dn.
struct Perturbation {
  std::vector<VectorField> dE;
  Eigen::VectorXd dsigma;
  Eigen::VectorXd dn;
};

// Linearization of (Maxwell rows, Lap(sigma |E_j|^2)) about a background.
// Row blocks: J Maxwell blocks (3 complex rows per node), their J conjugate
// blocks, then J data blocks. Rows live on nodes off the boundary.
struct LinearizedSystem {
  Medium background;
  std::vector<VectorField> E;
  bool freeze_dn = false;
  bool freeze_dsigma = false;

  const Grid& grid() const { return background.grid; }
  std::size_t nodes() const { return background.grid.size(); }
  std::size_t illuminations() const { return E.size(); }
  std::size_t unknown_size() const { return (6 * E.size() + 2) * nodes(); }
  std::size_t row_size() const { return 13 * E.size() * nodes(); }

  std::size_t field_offset(std::size_t j) const { return 6 * j * nodes(); }
  std::size_t dsigma_offset() const { return 6 * E.size() * nodes(); }
  std::size_t dn_offset() const { return dsigma_offset() + nodes(); }
  std::size_t maxwell_offset(std::size_t j) const { return 6 * j * nodes(); }
  std::size_t conj_offset(std::size_t j) const { return 6 * (E.size() + j) * nodes(); }
  std::size_t data_offset(std::size_t j) const { return 12 * E.size() * nodes() + j * nodes(); }
};

LinearizedSystem make_linearized_system(const Medium& background, std::vector<VectorField> E);

Eigen::VectorXd pack(const LinearizedSystem& sys, const Perturbation& w);
Perturbation unpack(const LinearizedSystem& sys, const Eigen::VectorXd& w);

Eigen::VectorXd apply_linearized(const LinearizedSystem& sys, const Eigen::VectorXd& w);
Eigen::VectorXd apply_linearized_transpose(const LinearizedSystem& sys, const Eigen::VectorXd& r);

// Real inner product on flat vectors (complex rows count Re and Im parts).
inline double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); }

// Rows vector with Lap(dH_j) in the data blocks and zero Maxwell rows.
Eigen::VectorXd data_rows(const LinearizedSystem& sys, const std::vector<Eigen::VectorXd>& dH);

// Dirichlet value on boundary nodes and outward normal difference
// (w(b) - w(b - h nu)) / h on face-interior boundary nodes. Both use the
// flat unknown layout; entries elsewhere are ignored.
struct BoundaryTraces {
  Eigen::VectorXd value;
  Eigen::VectorXd normal;
};

BoundaryTraces traces_of(const LinearizedSystem& sys, const Eigen::VectorXd& w);
BoundaryTraces zero_traces(const LinearizedSystem& sys);
// Unknown vector that matches the traces on the fixed layers, zero elsewhere.
Eigen::VectorXd extend_traces(const LinearizedSystem& sys, const BoundaryTraces& t);
// 1 on free unknowns (inside the fixed layers, field not frozen), else 0.
Eigen::VectorXd free_mask(const LinearizedSystem& sys);

struct NormalSolveOptions {
  // Tikhonov weight; unset selects 1e-8 |A^t S| / |S|.
  std::optional<double> reg;
  double tol = 1e-10;
  int max_iter = 50000;
  // iterations without a new best residual before declaring stagnation
  int stagnation_window = 2000;
};

struct NormalSolveResult {
  Eigen::VectorXd w;
  int iterations = 0;
  double gradient_rel = 0.0;
  double reg = 0.0;
  bool ill_posed_warning = false;
  // Extreme Ritz values of the Jacobi-scaled normal operator from the CG run.
  double ritz_min = 0.0;
  double ritz_max = 0.0;
};

// min |A w - S|^2 + reg |w_free|^2 with w fixed on the trace layers.
NormalSolveResult normal_solve(const LinearizedSystem& sys, const Eigen::VectorXd& S, const BoundaryTraces& traces,
                               const NormalSolveOptions& opt = {});

struct SpectrumEstimate {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double sigma_min = 0.0;  // sqrt(lambda_min)
  int steps = 0;
};

// Lanczos on the free block of A^t A (no preconditioning).
SpectrumEstimate normal_operator_spectrum(const LinearizedSystem& sys, int steps = 200, unsigned seed = 7);

struct GaussNewtonConfig {
  int max_iter = 10;
  double tol = 1e-8;         // stop when |r| <= tol |Lap H|
  double stagnation = 1e-4;  // stop when the relative decrease falls below this
  double armijo = 1e-4;
  int max_halvings = 12;
  int max_growth = 3;
  double n_floor = kDefaultNFloor;
  bool freeze_dn = false;
  bool linear = false;  // one undamped step, report (dsigma, dn)
  NormalSolveOptions inner{};
  SolverConfig forward{};
  // Measured fields on the trace layers; when absent they come from the
  // forward solution of the initial medium.
  std::optional<std::vector<VectorField>> boundary_fields;
};

struct ReconstructionResult {
  Medium medium;
  std::vector<VectorField> E;
  Eigen::VectorXd delta_sigma;
  Eigen::VectorXd delta_n;
  std::vector<double> residual_history;  // |r| / |Lap H| per accepted iterate
  double boundary_mismatch = 0.0;
  int iterations = 0;
};

// Nonlinear residual rows (Maxwell rows, conjugates, Lap(sigma|E_j|^2 - H_j)).
Eigen::VectorXd nonlinear_residual(const Medium& m, const std::vector<VectorField>& E,
                                   const std::vector<Eigen::VectorXd>& H);

ReconstructionResult gauss_newton(const InternalData& data, const Medium& init,
                                  const std::vector<BoundaryIllumination>& illum, const GaussNewtonConfig& cfg = {});

// Relative L2 error of (sigma, n) stacked.
double relative_error(const Medium& recon, const Medium& truth);

struct SobolevRow {
  int order = 0;
  double lhs = 0.0;           // |w - w~|_{H^s}
  double data = 0.0;          // |H - H~|_{H^s}
  double trace_value = 0.0;   // |w^d - w~^d|_{H^{s-1/2}} on faces
  double trace_normal = 0.0;  // |j^d - j~^d|_{H^{s-3/2}} on faces
  double ratio = 0.0;         // lhs / (data + traces)
};

struct StabilityInputs {
  Grid grid;
  std::vector<Eigen::VectorXd> unknowns_a, unknowns_b;  // real scalar fields
  std::vector<Eigen::VectorXd> data_a, data_b;
  std::vector<Eigen::VectorXd> value_a, value_b;    // boundary values (grid-sized)
  std::vector<Eigen::VectorXd> normal_a, normal_b;  // normal differences (grid-sized)
};

// Discrete Sobolev norms from the even reflection of each field, orders 0, 1, 2.
std::vector<SobolevRow> stability_report(const StabilityInputs& in);
double sobolev_norm(const Grid& g, const Eigen::VectorXd& f, double order);
// Norm of the face traces of f (boundary nodes only).
double trace_sobolev_norm(const Grid& g, const Eigen::VectorXd& f, double order);

// Scalar fields of a reconstruction for stability_report: sigma, n, Re/Im E_j.
std::vector<Eigen::VectorXd> unknown_fields(const Medium& m, const std::vector<VectorField>& E);

// (f(b) - f(b + h nu_in)) / h on face-interior boundary nodes, zero elsewhere.
Eigen::VectorXd normal_difference(const Grid& g, const Eigen::VectorXd& f);

// Pairs two (medium, fields, data) triples for stability_report; values and
// normal differences are taken from the unknown fields.
StabilityInputs stability_inputs(const Medium& a, const std::vector<VectorField>& Ea,
                                 const std::vector<Eigen::VectorXd>& Ha, const Medium& b,
                                 const std::vector<VectorField>& Eb, const std::vector<Eigen::VectorXd>& Hb);

// H_j (1 + level * g) with g standard normal, seeded.
InternalData add_multiplicative_noise(const InternalData& d, double level, unsigned long long seed);

}  // namespace qtat
