#include "bsgd/experiment.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "bsgd/diagnostics.hpp"
#include "bsgd/errors.hpp"
#include "bsgd/io.hpp"
#include "bsgd/rng.hpp"

namespace bsgd {

using nlohmann::json;

namespace {

const char* preset_name(Preset p) {
  switch (p) {
    case Preset::integral:
      return "integral";
    case Preset::ct:
      return "ct";
    case Preset::custom:
      return "custom";
  }
  return "integral";
}

Preset preset_from_name(const std::string& s) {
  if (s == "integral") return Preset::integral;
  if (s == "ct") return Preset::ct;
  if (s == "custom") return Preset::custom;
  throw ConfigurationError("preset must be integral, ct or custom (got '" + s + "')");
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigurationError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigurationError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigurationError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

ScaleSpec parse_scale(const json& v) {
  if (v.is_number()) return {v.get<double>(), false};
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "L_max") return {1.0, true};
    if (s == "L_max/2") return {0.5, true};
  }
  throw ConfigurationError("schedule.scale must be a number, \"L_max\" or \"L_max/2\"");
}

json scale_to_json(const ScaleSpec& s) {
  if (!s.relative_to_l_max) return s.value;
  if (s.value == 1.0) return "L_max";
  if (s.value == 0.5) return "L_max/2";
  return s.value;
}

NoiseSpec parse_noise(const json& j) {
  reject_unknown(j, {"type", "sigma", "pct", "lo", "hi", "salt", "pepper", "seed"}, "noise");
  std::string type;
  read(j, "type", type, "noise");
  NoiseSpec spec;
  read(j, "seed", spec.seed, "noise");
  if (type == "gaussian") {
    GaussianNoise g;
    read(j, "sigma", g.sigma, "noise");
    spec.model = g;
  } else if (type == "impulse") {
    ImpulseNoise n;
    read(j, "pct", n.pct, "noise");
    read(j, "lo", n.lo, "noise");
    read(j, "hi", n.hi, "noise");
    spec.model = n;
  } else if (type == "salt_pepper") {
    SaltPepperNoise n;
    read(j, "pct", n.pct, "noise");
    if (j.contains("salt")) n.salt = j["salt"].get<double>();
    if (j.contains("pepper")) n.pepper = j["pepper"].get<double>();
    spec.model = n;
  } else {
    throw ConfigurationError("noise.type must be gaussian, impulse or salt_pepper");
  }
  spec.validate();
  return spec;
}

json noise_to_json(const NoiseSpec& spec) {
  json j;
  j["seed"] = spec.seed;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          j["type"] = "gaussian";
          j["sigma"] = m.sigma;
        } else if constexpr (std::is_same_v<T, ImpulseNoise>) {
          j["type"] = "impulse";
          j["pct"] = m.pct;
          j["lo"] = m.lo;
          j["hi"] = m.hi;
        } else {
          j["type"] = "salt_pepper";
          j["pct"] = m.pct;
          if (m.salt) j["salt"] = *m.salt;
          if (m.pepper) j["pepper"] = *m.pepper;
        }
      },
      spec.model);
  return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(Preset preset) {
  ExperimentConfig cfg;
  cfg.preset = preset;
  if (preset == Preset::ct) {
    cfg.n_batches = 60;
    cfg.epochs = 100;
    cfg.schedule.scale = {0.5, true};
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (!(r_x > 1.0) || !std::isfinite(r_x)) {
    throw ConfigurationError("r_x must satisfy 1 < r_x < inf (l^1 and l^inf are not smooth)");
  }
  if (!(r_y > 1.0) || !std::isfinite(r_y)) {
    throw ConfigurationError("r_y must satisfy 1 < r_y < inf (l^1 and l^inf are not smooth)");
  }
  if (!(p > 1.0) || !std::isfinite(p)) throw ConfigurationError("p must satisfy 1 < p < inf");
  if (method != "sgd" && method != "landweber" && method != "generalized_kaczmarz") {
    throw ConfigurationError("method must be sgd, landweber or generalized_kaczmarz");
  }
  if (q && method != "generalized_kaczmarz") {
    throw ConfigurationError("q is only valid with method generalized_kaczmarz");
  }
  if (method == "generalized_kaczmarz" && !q) {
    throw ConfigurationError("generalized_kaczmarz requires q");
  }
  if (epochs < 1) throw ConfigurationError("epochs must be >= 1");
  if (seeds < 1) throw ConfigurationError("seeds must be >= 1");
  if (n_batches < 1) throw ConfigurationError("n_batches must be >= 1");
  std::size_t rows = 0;
  if (preset == Preset::integral) {
    if (n < 40) throw ConfigurationError("integral preset needs n >= 40");
    rows = static_cast<std::size_t>(n);
  } else if (preset == Preset::ct) {
    ct.validate();
    if (ct.grid_side < 16) throw ConfigurationError("ct preset needs grid_side >= 16");
    rows = static_cast<std::size_t>(ct.n_angles) * static_cast<std::size_t>(ct.n_detectors);
  } else if (matrix_path.empty() || solution_path.empty()) {
    throw ConfigurationError("custom preset needs matrix and solution paths");
  }
  if (rows != 0 && rows % n_batches != 0) {
    throw ConfigurationError("n_batches (" + std::to_string(n_batches) +
                             ") must divide the number of rows (" + std::to_string(rows) + ")");
  }
  if (schedule.type != "paper_experiment" && schedule.type != "polynomial" &&
      schedule.type != "constant") {
    throw ConfigurationError("schedule.type must be paper_experiment, polynomial or constant");
  }
  if (!(schedule.scale.value > 0.0)) throw ConfigurationError("schedule.scale must be positive");
  if (stopping.type != "max_epochs" && stopping.type != "a_priori") {
    throw ConfigurationError("stopping.type must be max_epochs or a_priori");
  }
  if (stopping.type == "a_priori" && !noise) {
    throw ConfigurationError("a_priori stopping needs a noise model (delta > 0)");
  }
  if (noise) noise->validate();
  if (phantom_sigma && !(*phantom_sigma >= 0.0)) {
    throw ConfigurationError("phantom_sigma must be >= 0");
  }
  // Re-validates schedule/stopping invariants against the spaces.
  (void)solver_config(stopping.type == "a_priori" ? 1e-3 : 0.0);
}

SolverConfig ExperimentConfig::solver_config(double noise_level) const {
  SolverConfig sc;
  if (method == "landweber") {
    sc.method = Landweber{};
  } else if (method == "generalized_kaczmarz") {
    sc.method = GeneralizedKaczmarz{q.value_or(2.0)};
  } else {
    sc.method = Sgd{};
  }
  sc.x_space = SpaceDescriptor(r_x, p);
  sc.y_space = SpaceDescriptor(r_y, q.value_or(p));
  if (schedule.type == "polynomial") {
    sc.schedule = StepSchedule::polynomial(schedule.mu0, schedule.beta);
  } else if (schedule.type == "constant") {
    sc.schedule = StepSchedule::constant(schedule.mu0);
  } else {
    // The absolute scale is resolved once L_max is known; see build_problem.
    sc.schedule = StepSchedule::paper_experiment(schedule.scale.value);
  }
  if (stopping.type == "a_priori") {
    sc.stopping = APriori{noise_level, stopping.beta, p, stopping.theta};
  } else {
    sc.stopping = MaxEpochs{epochs};
  }
  sc.seed = seed;
  sc.epochs = epochs;
  sc.validate();
  return sc;
}

json ExperimentConfig::to_json() const {
  json j;
  j["preset"] = preset_name(preset);
  j["method"] = method;
  j["r_x"] = r_x;
  j["p"] = p;
  j["r_y"] = r_y;
  if (q) j["q"] = *q;
  j["n"] = n;
  j["n_batches"] = n_batches;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["seeds"] = seeds;
  j["jobs"] = jobs;
  j["midpoint_columns"] = midpoint_columns;
  j["schedule"] = {{"type", schedule.type},
                   {"scale", scale_to_json(schedule.scale)},
                   {"mu0", schedule.mu0},
                   {"beta", schedule.beta}};
  if (noise) j["noise"] = noise_to_json(*noise);
  if (phantom_sigma) j["phantom_sigma"] = *phantom_sigma;
  j["stopping"] = {{"type", stopping.type}, {"beta", stopping.beta}, {"theta", stopping.theta}};
  j["ct"] = {{"grid_side", ct.grid_side},
             {"n_angles", ct.n_angles},
             {"angle_step", ct.angle_step},
             {"n_detectors", ct.n_detectors},
             {"pixel_size", ct.pixel_size}};
  if (!matrix_path.empty()) j["matrix"] = matrix_path.string();
  if (!solution_path.empty()) j["solution"] = solution_path.string();
  j["output_dir"] = output_dir.string();
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"preset", "method", "r_x", "p", "r_y", "q", "n", "n_batches", "epochs", "seed",
                  "seeds", "jobs", "midpoint_columns", "schedule", "noise", "phantom_sigma",
                  "stopping", "ct", "matrix", "solution", "output_dir"},
                 "config");
  std::string preset = "integral";
  read(j, "preset", preset, "config");
  ExperimentConfig cfg = ExperimentConfig::defaults(preset_from_name(preset));
  read(j, "method", cfg.method, "config");
  read(j, "r_x", cfg.r_x, "config");
  read(j, "p", cfg.p, "config");
  read(j, "r_y", cfg.r_y, "config");
  if (j.contains("q")) {
    double q = 0.0;
    read(j, "q", q, "config");
    cfg.q = q;
    if (!j.contains("method")) cfg.method = "generalized_kaczmarz";
  }
  read(j, "n", cfg.n, "config");
  read(j, "n_batches", cfg.n_batches, "config");
  read(j, "epochs", cfg.epochs, "config");
  read(j, "seed", cfg.seed, "config");
  read(j, "seeds", cfg.seeds, "config");
  read(j, "jobs", cfg.jobs, "config");
  read(j, "midpoint_columns", cfg.midpoint_columns, "config");
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    reject_unknown(s, {"type", "scale", "mu0", "beta"}, "schedule");
    read(s, "type", cfg.schedule.type, "schedule");
    if (s.contains("scale")) cfg.schedule.scale = parse_scale(s["scale"]);
    read(s, "mu0", cfg.schedule.mu0, "schedule");
    read(s, "beta", cfg.schedule.beta, "schedule");
  }
  if (j.contains("noise") && !j["noise"].is_null()) cfg.noise = parse_noise(j["noise"]);
  if (j.contains("phantom_sigma")) {
    double s = 0.0;
    read(j, "phantom_sigma", s, "config");
    cfg.phantom_sigma = s;
  }
  if (j.contains("stopping")) {
    const json& s = j["stopping"];
    reject_unknown(s, {"type", "beta", "theta"}, "stopping");
    read(s, "type", cfg.stopping.type, "stopping");
    read(s, "beta", cfg.stopping.beta, "stopping");
    read(s, "theta", cfg.stopping.theta, "stopping");
  }
  if (j.contains("ct")) {
    const json& c = j["ct"];
    reject_unknown(c, {"grid_side", "n_angles", "angle_step", "n_detectors", "pixel_size"}, "ct");
    read(c, "grid_side", cfg.ct.grid_side, "ct");
    read(c, "n_angles", cfg.ct.n_angles, "ct");
    read(c, "angle_step", cfg.ct.angle_step, "ct");
    read(c, "n_detectors", cfg.ct.n_detectors, "ct");
    read(c, "pixel_size", cfg.ct.pixel_size, "ct");
  }
  std::string path;
  if (j.contains("matrix")) {
    read(j, "matrix", path, "config");
    cfg.matrix_path = path;
  }
  if (j.contains("solution")) {
    read(j, "solution", path, "config");
    cfg.solution_path = path;
  }
  if (j.contains("output_dir")) {
    read(j, "output_dir", path, "config");
    cfg.output_dir = path;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = config_from_json(j);
  if (cfg.preset == Preset::custom) {
    const auto base = path.parent_path();
    if (cfg.matrix_path.is_relative()) cfg.matrix_path = base / cfg.matrix_path;
    if (cfg.solution_path.is_relative()) cfg.solution_path = base / cfg.solution_path;
  }
  return cfg;
}

std::string config_help() {
  return R"(Config keys (JSON object, unknown keys rejected):
  preset            integral | ct | custom                    [integral]
  method            sgd | landweber | generalized_kaczmarz    [sgd; generalized_kaczmarz if q given]
  r_x, p            primal norm exponent and duality power   [2, 2]
  r_y               data norm exponent                        [2]
  q                 residual power for generalized_kaczmarz, 1 < q <= 2
  n                 integral discretization size              [1000]
  n_batches         mini-batches, must divide the row count   [integral 100, ct 60]
  epochs            epoch budget                              [integral 250, ct 100]
  seed, seeds       first seed and number of seeds            [0, 1]
  jobs              worker threads for seeds                  [1]
  midpoint_columns  integral column nodes at cell midpoints   [true]
  schedule          {type: paper_experiment|polynomial|constant,
                     scale: number|"L_max"|"L_max/2", mu0, beta}
                    [paper_experiment; integral L_max, ct L_max/2; mu0 1; beta 0.75]
  noise             {type: gaussian|impulse|salt_pepper, sigma, pct, lo, hi,
                     salt, pepper, seed}                      [none; lo 0.1, hi 0.4,
                                                               salt max(y), pepper 0]
  phantom_sigma     Gaussian noise on the ct phantom before projection
  stopping          {type: max_epochs|a_priori, beta, theta}  [max_epochs; 0.75; 0.9]
  ct                {grid_side, n_angles, angle_step, n_detectors, pixel_size}
                    [64, 60, 3, 95, 0.1]
  matrix, solution  CSV paths for the custom preset
  output_dir        output directory                          [out]
)";
}

// ---------------------------------------------------------------------------

ExperimentProblem build_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  Matrix full;
  PrimalVector x_dagger;
  switch (cfg.preset) {
    case Preset::integral:
      full = build_integral_operator(cfg.n, cfg.midpoint_columns);
      x_dagger = exact_sparse_signal(cfg.n);
      break;
    case Preset::ct:
      full = build_radon_operator(cfg.ct);
      x_dagger = sparse_disk_phantom(cfg.ct.grid_side);
      break;
    case Preset::custom:
      full = read_matrix_csv(cfg.matrix_path);
      x_dagger = read_vector_csv(cfg.solution_path);
      if (x_dagger.size() != full.cols()) {
        throw ConfigurationError("solution length does not match matrix columns");
      }
      if (static_cast<std::size_t>(full.rows()) % cfg.n_batches != 0) {
        throw ConfigurationError("n_batches must divide the number of matrix rows");
      }
      break;
  }

  PrimalVector projected = x_dagger;
  if (cfg.phantom_sigma && *cfg.phantom_sigma > 0.0) {
    NoiseSpec pre{GaussianNoise{*cfg.phantom_sigma}, cfg.noise ? cfg.noise->seed + 1 : 1};
    projected = corrupt(x_dagger, pre).data;
  }
  Vector clean = full * projected;
  Vector data = clean;
  double delta = 0.0;
  if (cfg.noise) {
    const CorruptedData c = corrupt(clean, *cfg.noise, cfg.r_y);
    data = c.data;
    delta = c.delta;
  }

  const SpaceDescriptor x_space(cfg.r_x, cfg.p);
  const SpaceDescriptor y_space(cfg.r_y, cfg.q.value_or(cfg.p));
  PrimalVector x_hat =
      cfg.preset == Preset::ct ? x_dagger : reference_solution(full, clean, x_space, y_space);
  BlockOperator op = partition_rows(full, cfg.n_batches, y_space);
  full.resize(0, 0);
  ObservationSet obs = ObservationSet::from_full(op, data, delta);
  const double l_max = max_block_norm(op, cfg.r_x, cfg.r_y);
  return {std::move(op), std::move(clean), std::move(obs), std::move(x_dagger), std::move(x_hat), l_max};
}

namespace {

std::string mean_csv(const std::vector<ConvergenceRecord>& records) {
  static constexpr Column kColumns[] = {Column::objective, Column::residual, Column::bregman,
                                        Column::delta1, Column::delta2};
  static constexpr const char* kNames[] = {"objective", "residual", "bregman", "delta1", "delta2"};
  std::string out = "epoch";
  for (const char* name : kNames) out += std::string(",") + name + "_mean," + name + "_se";
  out += '\n';
  const std::size_t rows = records.front().rows.size();
  const auto n = static_cast<double>(records.size());
  for (std::size_t e = 0; e < rows; ++e) {
    out += std::to_string(records.front().rows[e].epoch);
    for (Column c : kColumns) {
      double sum = 0.0;
      for (const auto& r : records) sum += column_value(r.rows[e], c);
      const double mean = sum / n;
      double ss = 0.0;
      for (const auto& r : records) {
        const double d = column_value(r.rows[e], c) - mean;
        ss += d * d;
      }
      const double se = records.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
      out += ',' + format_double(mean) + ',' + format_double(se);
    }
    out += '\n';
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  ExperimentProblem problem = build_problem(cfg);
  SolverConfig solver = cfg.solver_config(problem.obs.noise_level);
  if (cfg.schedule.type == "paper_experiment") {
    const double scale = cfg.schedule.scale.relative_to_l_max
                             ? cfg.schedule.scale.value * problem.l_max
                             : cfg.schedule.scale.value;
    solver.schedule = StepSchedule::paper_experiment(scale);
  }
  const References refs{problem.x_dagger, problem.x_hat};

  std::vector<RunResult> results(cfg.seeds, RunResult{{}, IterationState::initial(0, 0), 0, true});
  parallel_for(cfg.seeds, cfg.jobs, [&](std::size_t s) {
    SolverConfig seeded = solver;
    seeded.seed = cfg.seed + s;
    results[s] = run(problem.op, problem.obs, seeded, refs, problem.l_max);
  });

  for (std::size_t s = 0; s < results.size(); ++s) {
    const IterationState& st = results[s].state;
    const DualVector remapped = duality_map(st.x, solver.x_space);
    const double drift = (remapped - st.dual_x).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, st.dual_x.cwiseAbs().maxCoeff());
    if (drift > 1e-10 * scale) {
      throw InvariantViolation("seed " + std::to_string(cfg.seed + s) +
                               ": dual iterate drifted from J_p(x) by " + format_double(drift));
    }
  }

  std::filesystem::create_directories(cfg.output_dir);
  ExperimentOutput out;
  out.realized_delta = problem.obs.noise_level;
  out.l_max = problem.l_max;
  for (std::size_t s = 0; s < results.size(); ++s) {
    const auto path = cfg.output_dir / ("trace_seed_" + std::to_string(cfg.seed + s) + ".csv");
    write_record_csv(path, results[s].record);
    out.files.push_back(path);
    out.records.push_back(results[s].record);
  }
  const auto mean_path = cfg.output_dir / "mean.csv";
  write_text(mean_path, mean_csv(out.records));
  out.files.push_back(mean_path);

  const PrimalVector& recon = results.front().state.x;
  const auto recon_path = cfg.output_dir / "reconstruction.csv";
  write_vector_csv(recon_path, recon);
  out.files.push_back(recon_path);
  if (cfg.preset == Preset::ct) {
    const auto pgm_path = cfg.output_dir / "reconstruction.pgm";
    write_pgm(pgm_path, recon, cfg.ct.grid_side, cfg.ct.grid_side);
    out.files.push_back(pgm_path);
  }

  std::vector<double> epochs;
  std::vector<double> objective_mean;
  std::vector<double> bregman_mean;
  for (std::size_t e = 0; e < out.records.front().rows.size(); ++e) {
    epochs.push_back(static_cast<double>(out.records.front().rows[e].epoch));
    double o = 0.0;
    double b = 0.0;
    for (const auto& r : out.records) {
      o += r.rows[e].objective;
      b += r.rows[e].bregman;
    }
    objective_mean.push_back(o / static_cast<double>(out.records.size()));
    bregman_mean.push_back(b / static_cast<double>(out.records.size()));
  }
  const auto svg_path = cfg.output_dir / "convergence.svg";
  write_text(svg_path, svg_line_plot("Mean objective and Bregman distance",
                                     {{"objective", epochs, objective_mean},
                                      {"Bregman", epochs, bregman_mean}},
                                     true));
  out.files.push_back(svg_path);

  json manifest;
  manifest["config"] = cfg.to_json();
  manifest["version"] = std::string(kVersion);
  manifest["rng"] = std::string(Rng::algorithm);
  manifest["realized_delta"] = problem.obs.noise_level;
  manifest["l_max"] = problem.l_max;
  json stops = json::array();
  for (const auto& r : results) {
    stops.push_back({{"target_iterations", r.target_iterations}, {"reached_target", r.reached_target},
                     {"iterations", r.state.k}});
  }
  manifest["runs"] = stops;
  manifest["timestamp"] = utc_timestamp();
  const auto manifest_path = cfg.output_dir / "manifest.json";
  write_text(manifest_path, manifest.dump(2) + "\n");
  out.files.push_back(manifest_path);
  return out;
}

}  // namespace bsgd
