#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsgd/noise.hpp"
#include "bsgd/operators.hpp"
#include "bsgd/solver.hpp"

namespace bsgd {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Preset { integral, ct, custom };

/// Schedule scale given either as a number or relative to L_max.
struct ScaleSpec {
  double value = 1.0;
  bool relative_to_l_max = true;  // scale = value * L_max
};

struct ScheduleSpec {
  std::string type = "paper_experiment";  // paper_experiment | polynomial | constant
  ScaleSpec scale;
  double mu0 = 1.0;
  double beta = 0.75;
};

struct StoppingSpec {
  std::string type = "max_epochs";  // max_epochs | a_priori
  double beta = 0.75;
  double theta = 0.9;
};

/// Everything one experiment needs; every field has a documented default.
struct ExperimentConfig {
  Preset preset = Preset::integral;
  std::string method = "sgd";  // sgd | landweber | generalized_kaczmarz
  double r_x = 2.0;
  double p = 2.0;
  double r_y = 2.0;
  std::optional<double> q;

  int n = 1000;
  std::size_t n_batches = 100;
  std::size_t epochs = 250;
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  unsigned jobs = 1;
  bool midpoint_columns = true;

  ScheduleSpec schedule;
  std::optional<NoiseSpec> noise;
  std::optional<double> phantom_sigma;  // Gaussian noise on the CT phantom before projection
  StoppingSpec stopping;
  RadonGeometry ct;
  std::filesystem::path matrix_path;    // custom preset
  std::filesystem::path solution_path;  // custom preset
  std::filesystem::path output_dir = "out";

  /// Preset defaults: integral n = 1000, N_b = 100, 250 epochs, scale L_max;
  /// ct 64x64 grid, 60 angles of 3 deg, 95 detectors, N_b = 60, scale L_max/2.
  static ExperimentConfig defaults(Preset preset);

  /// Throws ConfigurationError naming the violated invariant.
  void validate() const;
  SolverConfig solver_config(double noise_level) const;
  nlohmann::json to_json() const;
};

/// Strict parse: unknown keys are rejected. Throws ParseError with line and
/// column context for malformed JSON, ConfigurationError for invalid values
/// and IoError for unreadable files.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Help text listing all keys and their defaults.
std::string config_help();

struct ExperimentProblem {
  BlockOperator op;
  Vector clean_data;
  ObservationSet obs;
  PrimalVector x_dagger;
  PrimalVector x_hat;
  double l_max = 0.0;
};

/// Builds operator, data, noise and references for a config.
ExperimentProblem build_problem(const ExperimentConfig& cfg);

struct ExperimentOutput {
  std::vector<std::filesystem::path> files;
  double realized_delta = 0.0;
  double l_max = 0.0;
  std::vector<ConvergenceRecord> records;
};

/// Runs all seeds and writes per-seed traces, the ensemble mean, the final
/// reconstruction (CSV, plus PGM for ct), an SVG plot and manifest.json.
/// Throws InvariantViolation when a run diverges or drifts from its dual
/// state, IoError on write failures.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

}  // namespace bsgd
