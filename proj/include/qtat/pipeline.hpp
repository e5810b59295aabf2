#pragma once

#include <exception>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qtat/cgo.hpp"
#include "qtat/forward.hpp"
#include "qtat/illum.hpp"
#include "qtat/inverse.hpp"
#include "qtat/medium.hpp"
#include "qtat/symbols.hpp"

namespace qtat {

namespace fs = std::filesystem;

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitSolver = 2, kExitResonance = 3, kExitDivergence = 4 };

int exit_code_of(const std::exception& e);
// One-line remediation for the error classes that have one, else empty.
std::string remediation_hint(const std::exception& e);

struct IlluminationConfig {
  std::string kind = "family";  // family | plane | cgo
  int count = 4;                // family: leading pairs of the direction family
  std::vector<Vec3d> directions;  // plane: polarization directions
  double s = 0.0;                 // cgo
  std::vector<std::pair<Vec3d, Vec3d>> rho_pairs;  // cgo; empty uses the direction family
};

struct SymbolConfig {
  bool enabled = true;
  int xi_samples = 512;
  int min_distance = 2;
};

struct InversionConfig {
  bool enabled = true;
  std::string mode = "newton";  // newton | linear
  int max_iter = 10;
  std::optional<double> reg;
  double inner_tol = 1e-6;
  double tol = 1e-8;
  double stagnation = 1e-4;
  bool freeze_dn = false;
  double noise_level = 0.0;
};

struct SweepConfig {
  std::vector<double> noise_levels;
  std::vector<double> reg_values;
  std::vector<double> trace_corruption;
  std::vector<double> s_values;
  Vec3d rho = Vec3d(0, 0, 1);
  Vec3d rho_perp = Vec3d(1, 0, 0);
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  unsigned long long rng_seed = 0;
  int grid_n = 16;
  PhantomKind phantom = PhantomKind::smooth_bump;
  PhantomParams medium;
  IlluminationConfig illumination;
  SolverConfig solver;
  SymbolConfig symbols;
  InversionConfig inversion;
  SweepConfig sweeps;
  std::string source_text;  // raw JSON, hashed into the manifest
};

// ConfigError with "<origin>:<line>:<column>: ..." for malformed JSON and the
// key path for invalid values.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const fs::path& file);

Medium truth_medium(const ExperimentConfig& cfg);
// Background of the phantom, the initial guess of the inversion.
Medium initial_medium(const ExperimentConfig& cfg);
// Full fields whose boundary values define the illuminations, built on `background`.
std::vector<VectorField> illumination_fields(const IlluminationConfig& ic, const Medium& background);
nlohmann::json illumination_spec(const IlluminationConfig& ic);

// Ellipticity scan plus Lopatinskii verdicts at sampled boundary nodes.
nlohmann::json symbol_report(const std::vector<VectorField>& E, const Medium& m, const EllipticityOptions& opt);

struct InversionInputs {
  InternalData data;
  Medium init;
  std::vector<BoundaryIllumination> illum;
  std::optional<std::vector<VectorField>> trace_fields;
  std::optional<Medium> truth;
  GaussNewtonConfig gn;
};

// Runs gauss_newton and writes medium/, E_<j>, residual.csv, stability.json
// and summary.json under dir. Returns the summary.
nlohmann::json run_inversion(const InversionInputs& in, const fs::path& dir);

// Every regular file under dir except manifest.json, sorted, with SHA-256.
nlohmann::json write_manifest(const fs::path& dir, nlohmann::json meta);

struct PipelineResult {
  int exit_code = kExitOk;
  fs::path dir;
  nlohmann::json manifest;
};

// forward -> data synthesis -> symbol check -> inversion -> sweeps.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const fs::path& out);

// Version line plus the schema revision of every serialized format.
std::string version_text();

}  // namespace qtat
