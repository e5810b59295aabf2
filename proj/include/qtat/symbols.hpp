#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "qtat/fields.hpp"
#include "qtat/medium.hpp"

namespace qtat {

struct AB {
  double a = 0.0;
  double b = 0.0;
};

// a = -|E|^2|xi|^2 + 2 kappa |E.xi|^2,  b = 2 tau_n |E.xi|^2 (bilinear E.xi).
AB ab_symbols(const Vec3c& E, double kappa, double tau_n, const Vec3d& xi);

// 6J x 2 block: for each j the rows of E_j then of conj(E_j).
Eigen::MatrixXcd a12_symbol(const std::vector<Vec3c>& E, cplx q0, double omega, const Vec3d& xi);

// Smallest singular value of a J x 2 real matrix; the Gram determinant is
// accumulated as a sum of squared 2x2 minors so rank deficiency gives 0.
double sigma_min_2col(const Eigen::MatrixX2d& A);

struct SymbolSample {
  std::size_t node = 0;
  Vec3d x = Vec3d::Zero();
  Vec3d xi = Vec3d::Zero();
  Eigen::MatrixXcd A0;  // (6J+J) x (6J+2)
  Eigen::MatrixX2d A22;
  double sigma_min = 0.0;
  double max_row_norm = 0.0;
  double rank_tol = 0.0;
  bool rank_ok = false;
};

inline constexpr double kDefaultRankRelTol = 1e-8;

SymbolSample assemble_symbol(const std::vector<Vec3c>& E, cplx q0, double omega, double kappa, double tau_n,
                             const Vec3d& xi, double rank_rel_tol = kDefaultRankRelTol);

std::vector<Vec3d> fibonacci_sphere(int n);

struct EllipticityOptions {
  int xi_samples = 2048;
  double rank_rel_tol = kDefaultRankRelTol;
  bool refine = true;
  int min_distance = 0;  // skip nodes closer than this to the boundary
};

struct EllipticityReport {
  double min_margin = 0.0;  // sigma_min / max row norm, minimized over (x, xi)
  double min_sigma = 0.0;   // sigma_min at the argmin
  std::size_t argmin_node = 0;
  Vec3d argmin_x = Vec3d::Zero();
  Vec3d argmin_xi = Vec3d::Zero();
  std::vector<double> point_margin;  // per node, NaN for skipped nodes
  std::vector<Vec3d> point_worst_xi;
  double rank_rel_tol = kDefaultRankRelTol;
  bool pass = false;
};

EllipticityReport ellipticity_scan(const std::vector<VectorField>& fields, const Medium& m,
                                   const EllipticityOptions& opt = {});

// |xi|^2 - tau_h |E_hat.xi|^2
double single_illum_symbol(const Vec3c& E_hat, double tau_h, const Vec3d& xi);
// Exact minimum over the unit sphere: 1 - tau_h * lambda_max(Re(E E^H)) for unit E.
double single_illum_sphere_min(const Vec3c& E_hat, double tau_h);
bool hyperbolicity_test(const Vec3c& E_hat, double tau_h);
// Bisection for the tau_h at which hyperbolicity_test switches on.
double hyperbolic_threshold(const Vec3c& E_hat, double lo = 0.0, double hi = 2.0, double tol = 1e-9);

enum class LopatinskiiVerdict { covering, not_covering, degenerate };
std::string to_string(LopatinskiiVerdict v);

struct LopatinskiiReport {
  Vec3d nu = Vec3d::Zero();
  Vec3d zeta_tan = Vec3d::Zero();
  int pair_j = 0, pair_l = 1;
  double frak_a = 0.0, frak_b = 0.0, frak_c = 0.0;
  double discriminant = 0.0;  // 4ac - b^2
  std::array<cplx, 4> lambdas{};
  std::array<cplx, 4> quartic_roots{};  // companion-matrix cross-check
  double root_mismatch = 0.0;
  int decaying = 0;
  double independence = 0.0;  // |det[v2 v4]|/(|v2||v4|) when two modes decay
  LopatinskiiVerdict verdict = LopatinskiiVerdict::degenerate;
};

// lambda_{1,2} = +-|zeta|, lambda_{3,4} = (i b +- sqrt(4ac - b^2)) / (2a).
std::array<cplx, 4> lopatinskii_lambdas(double frak_a, double frak_b, double frak_c, double zeta_norm);

// 2x2 matrix -lambda^2 A(nu) + i lambda [A(zeta,nu) + A(nu,zeta)] + A(zeta)
// built from rows (E1, E2).
Eigen::Matrix2cd lopatinskii_matrix(const Vec3c& E1, const Vec3c& E2, const Vec3d& nu, const Vec3d& zeta,
                                    double kappa, double tau_n, cplx lambda);

LopatinskiiReport lopatinskii_check(const Vec3c& E1, const Vec3c& E2, const Vec3d& nu, const Vec3d& zeta_tan,
                                    double kappa, double tau_n);
// Picks the row pair with the largest |a|; DegenerateCase if all vanish.
LopatinskiiReport lopatinskii_check_family(const std::vector<Vec3c>& E, const Vec3d& nu, const Vec3d& zeta_tan,
                                           double kappa, double tau_n, double degenerate_tol = 1e-12);

}  // namespace qtat
