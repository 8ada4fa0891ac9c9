// Command line front end: solve, experiment, norm-estimate.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bsgd/errors.hpp"
#include "bsgd/experiment.hpp"
#include "bsgd/io.hpp"
#include "bsgd/operators.hpp"

namespace {

enum Exit : int { kOk = 0, kValidation = 1, kInvariant = 2, kIo = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
  std::optional<unsigned> jobs;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> epochs;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "First RNG seed");
  cmd->add_option("--seeds", o.seeds, "Number of seeds");
  cmd->add_option("--jobs", o.jobs, "Worker threads");
  cmd->add_option("--out-dir", o.out_dir, "Output directory");
  cmd->add_option("--epochs", o.epochs, "Epoch budget");
}

// key=value with dotted keys for nested objects; values parse as JSON when
// possible and fall back to plain strings.
void apply_assignment(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw bsgd::ConfigurationError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json* node = &j;
  std::size_t start = 0;
  for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
    node = &(*node)[key.substr(start, dot - start)];
  }
  (*node)[key.substr(start)] = value;
}

void apply_flags(nlohmann::json& j, const Overrides& o) {
  if (o.seed) j["seed"] = *o.seed;
  if (o.seeds) j["seeds"] = *o.seeds;
  if (o.jobs) j["jobs"] = *o.jobs;
  if (o.out_dir) j["output_dir"] = *o.out_dir;
  if (o.epochs) j["epochs"] = *o.epochs;
}

int report(const bsgd::ExperimentOutput& out) {
  std::printf("realized_delta %s\nl_max %s\n", bsgd::format_double(out.realized_delta).c_str(),
              bsgd::format_double(out.l_max).c_str());
  const auto& last = out.records.front().rows.back();
  std::printf("final epoch %zu objective %s bregman %s\n", static_cast<std::size_t>(last.epoch),
              bsgd::format_double(last.objective).c_str(), bsgd::format_double(last.bregman).c_str());
  for (const auto& f : out.files) std::printf("wrote %s\n", f.string().c_str());
  return kOk;
}

int run_solve(const std::string& path, const Overrides& o) {
  bsgd::ExperimentConfig cfg = bsgd::parse_config(path);
  nlohmann::json j = cfg.to_json();
  apply_flags(j, o);
  return report(bsgd::run_experiment(bsgd::config_from_json(j)));
}

int run_preset(const std::string& preset, const std::vector<std::string>& assignments,
               const Overrides& o) {
  nlohmann::json j = bsgd::ExperimentConfig::defaults(preset == "ct" ? bsgd::Preset::ct
                                                                     : bsgd::Preset::integral)
                         .to_json();
  bool method_given = false;
  for (const auto& a : assignments) {
    apply_assignment(j, a);
    method_given = method_given || a.rfind("method=", 0) == 0;
  }
  // Same rule as a config file: q without a method selects generalized Kaczmarz.
  if (j.contains("q") && !method_given) j["method"] = "generalized_kaczmarz";
  apply_flags(j, o);
  return report(bsgd::run_experiment(bsgd::config_from_json(j)));
}

int run_norm(const std::string& path, double rx, double ry, int max_iter, double tol,
             int restarts) {
  const bsgd::Matrix a = bsgd::read_matrix_csv(path);
  const bsgd::NormEstimate est = bsgd::boyd_operator_norm(a, rx, ry, tol, max_iter, 0, restarts);
  // 12 digits: the estimate is only good to the tolerance anyway.
  std::printf("norm %.12g\niterations %d\nconverged %s\n", est.value,
              est.iterations, est.converged ? "true" : "false");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic gradient descent for linear inverse problems in l^r spaces"};
  app.set_version_flag("--version", std::string(bsgd::kVersion));
  app.footer(bsgd::config_help());
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path;
  auto* solve = app.add_subcommand("solve", "Run an experiment described by a JSON config");
  solve->add_option("config", config_path, "Config file")->required();
  add_run_flags(solve, overrides);

  std::string preset;
  std::vector<std::string> assignments;
  auto* experiment = app.add_subcommand("experiment", "Run a preset experiment");
  experiment->add_option("preset", preset, "integral or ct")
      ->required()
      ->check(CLI::IsMember({"integral", "ct"}));
  experiment->add_option("overrides", assignments, "key=value config overrides (dotted keys)");
  add_run_flags(experiment, overrides);

  std::string matrix_path;
  double rx = 2.0;
  double ry = 2.0;
  int max_iter = 1000;
  double tol = 1e-12;
  int restarts = 10;
  auto* norm = app.add_subcommand("norm-estimate", "Estimate ||A|| from l^rx to l^ry");
  norm->add_option("matrix", matrix_path, "Matrix CSV")->required();
  norm->add_option("--rx", rx, "Domain exponent")->required();
  norm->add_option("--ry", ry, "Range exponent")->required();
  norm->add_option("--max-iter", max_iter, "Iteration cap")->capture_default_str();
  norm->add_option("--tol", tol, "Relative tolerance")->capture_default_str();
  norm->add_option("--restarts", restarts, "Extra starting vectors")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*solve) return run_solve(config_path, overrides);
    if (*experiment) return run_preset(preset, assignments, overrides);
    return run_norm(matrix_path, rx, ry, max_iter, tol, restarts);
  } catch (const bsgd::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const bsgd::InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kInvariant;
  } catch (const bsgd::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvariant;
  }
}
