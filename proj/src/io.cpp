#include "qtat/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "qtat/errors.hpp"
#include "qtat/illum.hpp"

namespace qtat {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "raw array format assumes a little-endian host");

void write_f64(const fs::path& file, const double* data, std::size_t count) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!os) throw IoError("write failed: " + file.string());
}

std::vector<double> read_f64(const fs::path& file, std::size_t expected_count) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  is.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes != expected_count * sizeof(double))
    throw IoError(file.string() + ": expected " + std::to_string(expected_count) + " float64 values, found " +
                  std::to_string(bytes / sizeof(double)));
  is.seekg(0);
  std::vector<double> v(expected_count);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  return v;
}

namespace {

json grid_json(const Grid& g) {
  return json{{"dims", g.dims}, {"spacing", g.spacing}, {"origin", g.origin}};
}

Grid grid_from(const json& j) {
  try {
    return Grid(j.at("dims").get<std::array<int, 3>>(), j.at("spacing").get<double>(),
                j.at("origin").get<std::array<double, 3>>());
  } catch (const json::exception& e) {
    throw IoError(std::string("bad grid sidecar: ") + e.what());
  }
}

json read_json(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open " + file.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os << j.dump(2) << "\n";
}

void check_layout(const json& j, const fs::path& file) {
  if (j.value("dtype", "") != "f64" || j.value("order", "") != "C")
    throw IoError(file.string() + ": only dtype f64, order C is supported");
}

}  // namespace

void write_medium(const fs::path& dir, const Medium& m) {
  fs::create_directories(dir);
  json j = grid_json(m.grid);
  j["omega"] = m.omega;
  j["dtype"] = "f64";
  j["order"] = "C";
  j["schema_version"] = kSchemaVersion;
  write_json(dir / "medium.json", j);
  write_f64(dir / "n.bin", m.n.data(), m.n.size());
  write_f64(dir / "sigma.bin", m.sigma.data(), m.sigma.size());
}

Medium read_medium(const fs::path& dir, double n_floor) {
  const json j = read_json(dir / "medium.json");
  check_layout(j, dir / "medium.json");
  const Grid g = grid_from(j);
  const auto n = read_f64(dir / "n.bin", g.size());
  const auto s = read_f64(dir / "sigma.bin", g.size());
  return make_medium(g, Eigen::Map<const Eigen::VectorXd>(n.data(), n.size()),
                     Eigen::Map<const Eigen::VectorXd>(s.data(), s.size()), j.at("omega").get<double>(), n_floor);
}

void write_vector_field(const fs::path& dir, const std::string& stem, const VectorField& E) {
  fs::create_directories(dir);
  json j = grid_json(E.grid);
  j["dtype"] = "f64";
  j["order"] = "C";
  j["complex"] = true;
  j["components"] = 3;
  j["schema_version"] = kSchemaVersion;
  write_json(dir / (stem + ".json"), j);
  write_f64(dir / (stem + ".bin"), reinterpret_cast<const double*>(E.values.data()), 2 * E.values.size());
}

VectorField read_vector_field(const fs::path& dir, const std::string& stem) {
  const json j = read_json(dir / (stem + ".json"));
  check_layout(j, dir / (stem + ".json"));
  if (!j.value("complex", false) || j.value("components", 0) != 3)
    throw IoError(stem + ": not a complex 3-component field");
  const Grid g = grid_from(j);
  const auto raw = read_f64(dir / (stem + ".bin"), 6 * g.size());
  VectorField E(g);
  for (std::size_t i = 0; i < 3 * g.size(); ++i) E.values[i] = cplx(raw[2 * i], raw[2 * i + 1]);
  return E;
}

void write_scalar_field(const fs::path& dir, const std::string& stem, const Grid& g, const Eigen::VectorXd& v) {
  if (v.size() != static_cast<Eigen::Index>(g.size())) throw GridMismatch("scalar field size");
  fs::create_directories(dir);
  json j = grid_json(g);
  j["dtype"] = "f64";
  j["order"] = "C";
  j["complex"] = false;
  j["components"] = 1;
  j["schema_version"] = kSchemaVersion;
  write_json(dir / (stem + ".json"), j);
  write_f64(dir / (stem + ".bin"), v.data(), v.size());
}

Eigen::VectorXd read_scalar_field(const fs::path& dir, const std::string& stem, Grid* grid_out) {
  const json j = read_json(dir / (stem + ".json"));
  check_layout(j, dir / (stem + ".json"));
  const Grid g = grid_from(j);
  const auto raw = read_f64(dir / (stem + ".bin"), g.size());
  if (grid_out) *grid_out = g;
  return Eigen::Map<const Eigen::VectorXd>(raw.data(), raw.size());
}

void write_vector_fields(const fs::path& dir, const std::string& prefix, const std::vector<VectorField>& E) {
  for (std::size_t j = 0; j < E.size(); ++j) write_vector_field(dir, prefix + "_" + std::to_string(j), E[j]);
}

std::vector<VectorField> read_vector_fields(const fs::path& dir, const std::string& prefix) {
  std::vector<VectorField> out;
  for (std::size_t j = 0;; ++j) {
    const std::string stem = prefix + "_" + std::to_string(j);
    if (!fs::exists(dir / (stem + ".json"))) break;
    out.push_back(read_vector_field(dir, stem));
  }
  if (out.empty()) throw IoError("no " + prefix + "_<j> fields in " + dir.string());
  return out;
}

void write_scalar_fields(const fs::path& dir, const std::string& prefix, const Grid& g,
                         const std::vector<Eigen::VectorXd>& v) {
  for (std::size_t j = 0; j < v.size(); ++j) write_scalar_field(dir, prefix + "_" + std::to_string(j), g, v[j]);
}

std::vector<Eigen::VectorXd> read_scalar_fields(const fs::path& dir, const std::string& prefix, Grid* grid_out) {
  std::vector<Eigen::VectorXd> out;
  Grid g0;
  for (std::size_t j = 0;; ++j) {
    const std::string stem = prefix + "_" + std::to_string(j);
    if (!fs::exists(dir / (stem + ".json"))) break;
    Grid g;
    out.push_back(read_scalar_field(dir, stem, &g));
    if (j == 0) g0 = g;
    else require_same_grid(g0, g, "read_scalar_fields");
  }
  if (out.empty()) throw IoError("no " + prefix + "_<j> fields in " + dir.string());
  if (grid_out) *grid_out = g0;
  return out;
}

void write_illumination_set(const fs::path& dir, const std::vector<VectorField>& E, const std::string& spec_json) {
  fs::create_directories(dir);
  json spec;
  try {
    spec = spec_json.empty() ? json::object() : json::parse(spec_json);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("illumination spec is not JSON: ") + e.what());
  }
  write_json(dir / "illum.json",
             json{{"schema_version", kSchemaVersion}, {"count", E.size()}, {"spec", spec}});
  for (std::size_t j = 0; j < E.size(); ++j) {
    const Grid& g = E[j].grid;
    VectorField b(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto ijk = g.unravel(p);
      if (g.on_boundary(ijk[0], ijk[1], ijk[2])) b.set(p, E[j].at(p));
    }
    write_vector_field(dir, "illum_" + std::to_string(j), b);
  }
}

IlluminationSet read_illumination_set(const fs::path& dir) {
  const json j = read_json(dir / "illum.json");
  IlluminationSet s;
  s.spec_json = j.value("spec", json::object()).dump();
  const auto count = j.value("count", std::size_t{0});
  for (std::size_t k = 0; k < count; ++k) {
    s.boundary_fields.push_back(read_vector_field(dir, "illum_" + std::to_string(k)));
    s.traces.push_back(boundary_trace(s.boundary_fields.back()));
  }
  if (s.traces.empty()) throw IoError(dir.string() + ": empty illumination set");
  return s;
}

namespace {

std::string hex_digest(const unsigned char* md, unsigned int len) {
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  return hex_digest(md, len);
}

std::string sha256_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return hex_digest(md, len);
}

}  // namespace qtat
