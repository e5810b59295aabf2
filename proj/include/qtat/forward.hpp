#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "qtat/fields.hpp"
#include "qtat/medium.hpp"

namespace qtat {

// Face f = 2*axis + side (side 0: min, 1: max). Face nodes are ordered
// node-major over the two remaining axes in increasing axis order.
Vec3d face_normal(int face);
std::array<int, 2> face_axes(int face);
int face_node_count(const Grid& g, int face);
std::size_t face_node_to_grid(const Grid& g, int face, int u, int v);

// nu x E on each face; tangent to the face by construction.
struct BoundaryIllumination {
  Grid grid;
  std::array<Eigen::VectorXcd, 6> faces;

  Vec3c value(int face, int u, int v) const;
  // Tangential part of E recovered as (nu x E) x nu.
  Vec3c tangential(int face, int u, int v) const;
};

// Throws ParamError if any face value has a normal component.
void check_tangent(const BoundaryIllumination& f, double rel_tol = 1e-12);
BoundaryIllumination zero_illumination(const Grid& g);
BoundaryIllumination operator+(const BoundaryIllumination& a, const BoundaryIllumination& b);
BoundaryIllumination operator*(cplx s, const BoundaryIllumination& a);

VectorField apply_curl_curl(const Medium& m, const VectorField& E);
VectorField apply_elliptic_form(const Medium& m, const VectorField& E);

struct SolverConfig {
  enum class Method { automatic, krylov, direct };
  Method method = Method::automatic;
  double tol = 1e-8;
  int max_iter = 20000;
  // automatic: Krylov first, sparse LU fallback when max dim < direct_below
  int direct_below = 20;
  bool check_resolution = true;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool direct = false;
};

VectorField solve_forward(const Medium& m, const BoundaryIllumination& f, const SolverConfig& cfg = {},
                          SolveReport* report = nullptr);
// Several illuminations sharing one assembled operator.
std::vector<VectorField> solve_forward(const Medium& m, const std::vector<BoundaryIllumination>& fs,
                                       const SolverConfig& cfg = {}, std::vector<SolveReport>* reports = nullptr);

// q perturbation omega^2 dn + i omega dsigma.
Eigen::VectorXcd eval_dq(double omega, const Eigen::VectorXd& dsigma, const Eigen::VectorXd& dn);

// Interior rows of the q-derivative of apply_elliptic_form at fixed E.
VectorField apply_elliptic_form_dq(const Medium& m, const VectorField& E, const Eigen::VectorXcd& dq);

// Derivative of the discrete solutions E_j of solve_forward with respect to
// (sigma, n) in the direction (dsigma, dn), illuminations held fixed.
std::vector<VectorField> solve_forward_derivative(const Medium& m, const std::vector<VectorField>& E,
                                                  const Eigen::VectorXd& dsigma, const Eigen::VectorXd& dn,
                                                  const SolverConfig& cfg = {},
                                                  std::vector<SolveReport>* reports = nullptr);

// Smallest wavelength resolution check: h <= 2*pi/(8*omega*sqrt(max n)).
void check_resolution(const Medium& m);

struct InternalData {
  Grid grid;
  std::vector<Eigen::VectorXd> H;
};

Eigen::VectorXd internal_data(const Eigen::VectorXd& sigma, const VectorField& E);
InternalData internal_data(const Eigen::VectorXd& sigma, const std::vector<VectorField>& E);

}  // namespace qtat
