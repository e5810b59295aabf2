#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "qtat/fields.hpp"
#include "qtat/forward.hpp"

namespace qtat {

struct PlaneWaveParams {
  Vec3c zeta;
  Vec3c eta;
  cplx q0;
};

PlaneWaveParams plane_wave_params(cplx q0, const Vec3d& eta_dir);
// E(x) = eta * exp(i x.zeta), x measured from `origin`.
VectorField plane_wave_field(const Grid& g, const PlaneWaveParams& p, const Vec3d& origin = Vec3d::Zero());

struct CgoParams {
  double s = 0.0;
  Vec3d rho;
  Vec3d rho_perp;
  double k = 0.0;
  Vec3c a_vec;
  Vec3c b_vec;
  Vec3c zeta;
  Vec3c eta_zeta;
  Vec3c zeta_inf;  // (-i rho + rho_perp)/sqrt(2)
};

// a_vec defaults to conj(zeta_inf), b_vec to 0.
CgoParams cgo_params(double s, const Vec3d& rho, const Vec3d& rho_perp, double k,
                     std::optional<Vec3c> a_vec = std::nullopt, std::optional<Vec3c> b_vec = std::nullopt);

struct DirectionPair {
  Eigen::VectorXd rho;
  Eigen::VectorXd rho_perp;
};

struct DirectionFamily {
  int n_dim = 3;
  std::vector<DirectionPair> pairs;
};

DirectionFamily direction_family(int n_dim);

// Plane waves for a constant background, one per family pair, eta_j = rho_perp_j.
std::vector<PlaneWaveParams> plane_wave_family(cplx q0, const DirectionFamily& fam);

BoundaryIllumination boundary_trace(const VectorField& E);

// First s in s0, 2 s0, 4 s0, ... (s0 = 10 (1+k)) for which accept(s) holds.
double select_s(double k, const std::function<bool(double)>& accept, int max_doublings = 8);

}  // namespace qtat
