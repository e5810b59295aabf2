#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "qtat/fields.hpp"
#include "qtat/forward.hpp"
#include "qtat/medium.hpp"

namespace qtat {

namespace fs = std::filesystem;

// Format revision written into every sidecar.
inline constexpr int kSchemaVersion = 1;

void write_f64(const fs::path& file, const double* data, std::size_t count);
std::vector<double> read_f64(const fs::path& file, std::size_t expected_count);

void write_medium(const fs::path& dir, const Medium& m);
Medium read_medium(const fs::path& dir, double n_floor = kDefaultNFloor);

// Vector field as <stem>.json + <stem>.bin (interleaved re/im, node-major, xyz).
void write_vector_field(const fs::path& dir, const std::string& stem, const VectorField& E);
VectorField read_vector_field(const fs::path& dir, const std::string& stem);

void write_scalar_field(const fs::path& dir, const std::string& stem, const Grid& g,
                        const Eigen::VectorXd& v);
Eigen::VectorXd read_scalar_field(const fs::path& dir, const std::string& stem, Grid* grid_out = nullptr);

// Numbered families <prefix>_0, <prefix>_1, ...; reading stops at the first gap.
void write_vector_fields(const fs::path& dir, const std::string& prefix, const std::vector<VectorField>& E);
std::vector<VectorField> read_vector_fields(const fs::path& dir, const std::string& prefix);
void write_scalar_fields(const fs::path& dir, const std::string& prefix, const Grid& g,
                         const std::vector<Eigen::VectorXd>& v);
std::vector<Eigen::VectorXd> read_scalar_fields(const fs::path& dir, const std::string& prefix,
                                                Grid* grid_out = nullptr);

// Illumination set: illum.json (count plus the generating parameters as a JSON
// text) and illum_<j> fields holding E on the boundary nodes, zero elsewhere.
struct IlluminationSet {
  std::vector<VectorField> boundary_fields;
  std::vector<BoundaryIllumination> traces;
  std::string spec_json;
};

void write_illumination_set(const fs::path& dir, const std::vector<VectorField>& E, const std::string& spec_json);
IlluminationSet read_illumination_set(const fs::path& dir);

std::string sha256_file(const fs::path& file);
std::string sha256_hex(const std::string& bytes);

}  // namespace qtat
