#include "qtat/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qtat/errors.hpp"
#include "qtat/fields.hpp"

namespace qtat {

Grid::Grid(std::array<int, 3> d, double h, std::array<double, 3> o) : dims(d), spacing(h), origin(o) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 4) throw ParamError("grid dims must be >= 4 per axis");
    if (!std::isfinite(origin[a])) throw ParamError("grid origin must be finite");
  }
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ParamError("grid spacing must be positive");
}

Grid Grid::unit_cube(int n) { return Grid({n, n, n}, 1.0 / (n - 1)); }

std::array<int, 3> Grid::unravel(std::size_t idx) const {
  const int k = static_cast<int>(idx % dims[2]);
  idx /= dims[2];
  const int j = static_cast<int>(idx % dims[1]);
  const int i = static_cast<int>(idx / dims[1]);
  return {i, j, k};
}

std::array<double, 3> Grid::center() const {
  return {origin[0] + 0.5 * (dims[0] - 1) * spacing, origin[1] + 0.5 * (dims[1] - 1) * spacing,
          origin[2] + 0.5 * (dims[2] - 1) * spacing};
}

int Grid::boundary_distance(int i, int j, int k) const {
  const int p[3] = {i, j, k};
  int d = dims[0];
  for (int a = 0; a < 3; ++a) d = std::min({d, p[a], dims[a] - 1 - p[a]});
  return d;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw GridMismatch(std::string("grid mismatch: ") + what);
}

VectorField::VectorField(const Grid& g, Eigen::VectorXcd v) : grid(g), values(std::move(v)) {
  if (values.size() != static_cast<Eigen::Index>(3 * g.size()))
    throw GridMismatch("vector field size does not match grid");
}

Eigen::VectorXd squared_magnitude(const VectorField& E) {
  const std::size_t N = E.nodes();
  Eigen::VectorXd out(N);
  for (std::size_t p = 0; p < N; ++p) out[p] = E.values.segment<3>(3 * p).squaredNorm();
  return out;
}

}  // namespace qtat
