#pragma once

#include <array>
#include <cstddef>

namespace qtat {

// Uniform node-collocated grid. Node (i,j,k) sits at origin + (i,j,k)*spacing.
struct Grid {
  std::array<int, 3> dims{};
  double spacing = 0.0;
  std::array<double, 3> origin{};

  Grid() = default;
  Grid(std::array<int, 3> dims, double spacing, std::array<double, 3> origin = {0.0, 0.0, 0.0});

  static Grid unit_cube(int n);  // n nodes per axis spanning [0,1]^3

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
  }
  std::array<int, 3> unravel(std::size_t idx) const;
  std::array<double, 3> coord(int i, int j, int k) const {
    return {origin[0] + i * spacing, origin[1] + j * spacing, origin[2] + k * spacing};
  }
  std::array<double, 3> center() const;
  // Distance (in nodes) to the nearest face; 0 on the boundary.
  int boundary_distance(int i, int j, int k) const;
  bool on_boundary(int i, int j, int k) const { return boundary_distance(i, j, k) == 0; }
  std::array<std::ptrdiff_t, 3> strides() const {
    return {static_cast<std::ptrdiff_t>(dims[1]) * dims[2], dims[2], 1};
  }

  bool operator==(const Grid& o) const = default;
};

void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace qtat
