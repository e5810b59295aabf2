#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "qtat/fields.hpp"
#include "qtat/grid.hpp"

namespace qtat {

inline constexpr double kDefaultNFloor = 1e-6;

struct Medium {
  Grid grid;
  Eigen::VectorXd n;
  Eigen::VectorXd sigma;
  double omega = 1.0;
};

// Builds a medium and checks it against the admissible set.
Medium make_medium(const Grid& grid, Eigen::VectorXd n, Eigen::VectorXd sigma, double omega,
                   double n_floor = kDefaultNFloor);
void check_admissible(const Medium& m, double n_floor = kDefaultNFloor);

Eigen::VectorXcd eval_q(const Medium& m);

struct DerivedFields {
  Eigen::VectorXcd q;
  Eigen::VectorXd kappa;
  Eigen::VectorXd tau_n;
  Eigen::VectorXd tau_h;
};

DerivedFields derived_fields(const Medium& m);

// Pointwise versions, used by symbol code.
double kappa_of(double omega, double n, double sigma);
double tau_n_of(double omega, double n, double sigma);

enum class PhantomKind { constant, smooth_bump, two_inclusions };
enum class BumpProfile { smooth, poly3, gaussian };

struct Bump {
  std::array<double, 3> center{};
  double radius = 0.0;
  double dn = 0.0;
  double dsigma = 0.0;
};

struct PhantomParams {
  double omega = 1.0;
  double n_background = 1.0;
  double sigma_background = 0.0;
  std::vector<Bump> bumps;  // smooth_bump uses 1, two_inclusions uses 2
  BumpProfile profile = BumpProfile::smooth;
  int collar = 2;           // cells next to the boundary kept at background
  double n_floor = kDefaultNFloor;
};

// Profile value at normalized radius r = |x-c|/R; 1 at r=0, 0 for r >= 1.
double bump_profile(BumpProfile p, double r);

Medium make_phantom(PhantomKind kind, const Grid& grid, const PhantomParams& params);

PhantomKind parse_phantom_kind(const std::string& s);
BumpProfile parse_bump_profile(const std::string& s);

}  // namespace qtat
