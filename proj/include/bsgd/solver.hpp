#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "bsgd/operators.hpp"
#include "bsgd/rng.hpp"
#include "bsgd/spaces.hpp"

namespace bsgd {

// ---------------------------------------------------------------------------
// Method variants.

/// Kaczmarz-type SGD: one uniformly drawn block per iteration, residual
/// duality power equal to the primal power p.
struct Sgd {};
/// Full-data gradient A^T J_p(Ax - y) on the product space (sum_i ||.||^p)^(1/p).
struct Landweber {};
/// SGD with residual duality power q in (1, 2] instead of p.
struct GeneralizedKaczmarz {
  double q = 2.0;
};
using Method = std::variant<Sgd, Landweber, GeneralizedKaczmarz>;

// ---------------------------------------------------------------------------
// Step sizes.

struct StepContext {
  double l_max = 1.0;
  std::size_t n_batches = 1;
  double p_conj = 2.0;
};

struct PolynomialSchedule {
  double mu0 = 1.0;
  double beta = 1.0;
};
/// scale / (1 + 0.05 (k / N_b)^{1/p* + 0.01}).
struct PaperSchedule {
  double scale = 1.0;
};
struct ConstantSchedule {
  double mu0 = 1.0;
};

class StepSchedule {
 public:
  using Variant = std::variant<PolynomialSchedule, PaperSchedule, ConstantSchedule>;

  /// mu0 k^{-beta}; requires mu0 > 0 and 0 < beta <= 1. The lower bound
  /// beta > 1/p* depends on the primal space and is checked by SolverConfig.
  static StepSchedule polynomial(double mu0, double beta);
  static StepSchedule paper_experiment(double scale);
  static StepSchedule constant(double mu0);

  const Variant& variant() const noexcept { return v_; }

 private:
  explicit StepSchedule(Variant v) : v_(v) {}
  Variant v_;
};

/// mu_k for k >= 1. Throws InvalidInput for k == 0.
double step_size(const StepSchedule& schedule, std::uint64_t k, const StepContext& ctx);

// ---------------------------------------------------------------------------
// Stopping.

struct MaxEpochs {
  std::size_t epochs = 1;
};
/// k(delta) = ceil(delta^{-theta p / (1 - beta)}).
struct APriori {
  double delta = 0.0;
  double beta = 0.75;
  double p = 2.0;
  double theta = 0.9;
};
using StoppingRule = std::variant<MaxEpochs, APriori>;

/// Iteration count k(delta); saturates at UINT64_MAX. Throws
/// ConfigurationError for beta == 1 (use MaxEpochs), delta <= 0 or theta
/// outside (0, 1).
std::uint64_t a_priori_stop_index(const APriori& rule);

// ---------------------------------------------------------------------------
// Configuration and state.

struct SolverConfig {
  Method method = Sgd{};
  SpaceDescriptor x_space = SpaceDescriptor::hilbert();
  /// Only r() is used: the residual duality power comes from the method.
  SpaceDescriptor y_space = SpaceDescriptor::hilbert();
  StepSchedule schedule = StepSchedule::constant(1.0);
  StoppingRule stopping = MaxEpochs{1};
  std::uint64_t seed = 0;
  /// Iteration budget in epochs; the run never goes beyond it.
  std::size_t epochs = 1;

  /// Throws ConfigurationError on violated invariants.
  void validate() const;
  /// p for Sgd/Landweber, q for GeneralizedKaczmarz.
  double residual_exponent() const;
};

/// Estimates of the convexity constant C_p of X and the smoothness constant
/// G_{p*} of X*.
struct ConstantsConfig {
  double g_pstar = 1.0;
  double c_p = 1.0;
  std::size_t estimation_samples = 0;
};

struct IterationState {
  PrimalVector x;
  DualVector dual_x;  // J_p(x); the iteration runs on this variable
  std::uint64_t k = 0;
  Rng rng;

  /// x0 = 0 with generator seeded by seed.
  static IterationState initial(Eigen::Index dim, std::uint64_t seed);
};

// ---------------------------------------------------------------------------
// Iteration.

/// A_i^T J(A_i x - y_i) with duality power `exponent` and norm exponent
/// r_Y of op.output_space().
DualVector stochastic_gradient(const VectorRef& x, const ObservationSet& obs,
                               const BlockOperator& op, std::size_t i, double exponent);

/// One SGD (or generalized Kaczmarz) step with a uniformly drawn block.
IterationState sgd_step(IterationState state, const BlockOperator& op, const ObservationSet& obs,
                        const SolverConfig& cfg, double mu);

/// One deterministic step with the full gradient sum_i A_i^T J_p(A_i x - y_i).
IterationState landweber_step(IterationState state, const BlockOperator& op,
                              const ObservationSet& obs, const SolverConfig& cfg, double mu);

/// (p* / (G L^{p*}))^{1/(p*-1)}.
double theoretical_max_step(const ConstantsConfig& constants, double l_max, double p_conj);

/// Sampled surrogates for C_p and G_{p*}, with safety factors 0.8 and 1.2.
/// The sample sequence for a given seed is prefix-stable, so more samples
/// can only raise G and lower C.
ConstantsConfig estimate_constants(const SpaceDescriptor& desc, Eigen::Index dim,
                                   std::size_t samples, std::uint64_t seed);

/// Ratios behind estimate_constants for one pair, without safety factors.
struct ConstantRatios {
  double convexity;   // p D(z, w) / ||w - z||^p
  double smoothness;  // p* D*(z*, w*) / ||w* - z*||^{p*}
};

// ---------------------------------------------------------------------------
// Driver.

struct References {
  std::optional<PrimalVector> x_dagger;  // ground truth for delta metrics
  std::optional<PrimalVector> x_hat;     // solution used for Bregman distances
};

struct EpochRow {
  std::size_t epoch = 0;
  double objective = 0.0;
  double residual = 0.0;
  double bregman = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double step = 0.0;
};

/// Per-epoch trace. Columns without a reference (bregman without x_hat,
/// delta1/delta2 without x_dagger) are zero.
struct ConvergenceRecord {
  std::vector<EpochRow> rows;
};

struct RunResult {
  ConvergenceRecord record;
  IterationState state;
  /// Iteration count the stopping rule asked for.
  std::uint64_t target_iterations = 0;
  /// False when the epoch budget ran out before the stopping rule fired.
  bool reached_target = true;
};

/// Runs from x0 = 0. An epoch is N_b iterations for SGD-type methods and one
/// step for Landweber. Bitwise deterministic in (problem, cfg).
/// Optional callback invoked with every recorded row and the matching iterate.
using EpochObserver = std::function<void(const EpochRow&, const IterationState&)>;

RunResult run(const BlockOperator& op, const ObservationSet& obs, const SolverConfig& cfg,
              const References& refs = {}, double l_max = 0.0, const EpochObserver& observer = {});

/// Step-size context for a problem; l_max <= 0 estimates it with Boyd's
/// method between l^{r_X} and l^{r_Y}.
StepContext make_step_context(const BlockOperator& op, const SolverConfig& cfg, double l_max = 0.0);

}  // namespace bsgd
