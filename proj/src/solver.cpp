#include "bsgd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bsgd/diagnostics.hpp"
#include "bsgd/errors.hpp"

namespace bsgd {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigurationError(std::string(what) + " must be positive and finite");
  }
}

bool is_landweber(const SolverConfig& cfg) {
  return std::holds_alternative<Landweber>(cfg.method);
}

void check_problem(const BlockOperator& op, const ObservationSet& obs) {
  if (obs.blocks.size() != op.block_count()) {
    throw DimensionError("observation set has " + std::to_string(obs.blocks.size()) +
                         " blocks, operator has " + std::to_string(op.block_count()));
  }
  for (std::size_t i = 0; i < obs.blocks.size(); ++i) {
    if (obs.blocks[i].size() != op.block(i).rows()) {
      throw DimensionError("data block " + std::to_string(i) + " has wrong length");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

StepSchedule StepSchedule::polynomial(double mu0, double beta) {
  require_positive(mu0, "mu0");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigurationError("polynomial schedule needs 0 < beta <= 1");
  return StepSchedule(PolynomialSchedule{mu0, beta});
}

StepSchedule StepSchedule::paper_experiment(double scale) {
  require_positive(scale, "schedule scale");
  return StepSchedule(PaperSchedule{scale});
}

StepSchedule StepSchedule::constant(double mu0) {
  require_positive(mu0, "mu0");
  return StepSchedule(ConstantSchedule{mu0});
}

double step_size(const StepSchedule& schedule, std::uint64_t k, const StepContext& ctx) {
  if (k == 0) throw InvalidInput("step index starts at 1");
  const auto kd = static_cast<double>(k);
  return std::visit(
      Overloaded{
          [&](const PolynomialSchedule& s) { return s.mu0 * std::pow(kd, -s.beta); },
          [&](const PaperSchedule& s) {
            const double epochs = kd / static_cast<double>(ctx.n_batches);
            return s.scale / (1.0 + 0.05 * std::pow(epochs, 1.0 / ctx.p_conj + 0.01));
          },
          [&](const ConstantSchedule& s) { return s.mu0; },
      },
      schedule.variant());
}

std::uint64_t a_priori_stop_index(const APriori& rule) {
  if (!(rule.delta > 0.0) || !std::isfinite(rule.delta)) {
    throw ConfigurationError("a-priori stopping needs a positive noise level");
  }
  if (!(rule.theta > 0.0 && rule.theta < 1.0)) {
    throw ConfigurationError("a-priori stopping needs 0 < theta < 1");
  }
  if (rule.beta == 1.0) {
    throw ConfigurationError("a-priori stopping is undefined for beta = 1; use max_epochs");
  }
  if (!(rule.beta > 0.0 && rule.beta < 1.0)) {
    throw ConfigurationError("a-priori stopping needs 0 < beta < 1");
  }
  require_positive(rule.p, "p");
  const double exponent = -rule.theta * rule.p / (1.0 - rule.beta);
  const double log_k = exponent * std::log(rule.delta);
  if (log_k >= 64.0 * std::numbers::ln2) return std::numeric_limits<std::uint64_t>::max();
  const double k = std::pow(rule.delta, exponent);
  // Absorb the last-ulp error of pow so exact powers (0.1^-2 = 100) do not
  // round up to the next integer.
  const double rounded = std::ceil(k * (1.0 - 1e-12));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(rounded));
}

// ---------------------------------------------------------------------------

void SolverConfig::validate() const {
  if (epochs < 1) throw ConfigurationError("epochs must be >= 1");
  if (const auto* gk = std::get_if<GeneralizedKaczmarz>(&method)) {
    if (!(gk->q > 1.0 && gk->q <= 2.0)) {
      throw ConfigurationError("generalized Kaczmarz needs 1 < q <= 2");
    }
  }
  if (const auto* poly = std::get_if<PolynomialSchedule>(&schedule.variant())) {
    if (!(poly->beta > 1.0 / x_space.p_conj())) {
      throw ConfigurationError("polynomial schedule needs 1/p* < beta <= 1");
    }
  }
  if (const auto* me = std::get_if<MaxEpochs>(&stopping)) {
    if (me->epochs < 1) throw ConfigurationError("max_epochs must be >= 1");
  }
  if (const auto* ap = std::get_if<APriori>(&stopping)) (void)a_priori_stop_index(*ap);
}

double SolverConfig::residual_exponent() const {
  if (const auto* gk = std::get_if<GeneralizedKaczmarz>(&method)) return gk->q;
  return x_space.p();
}

IterationState IterationState::initial(Eigen::Index dim, std::uint64_t seed) {
  return {PrimalVector::Zero(dim), DualVector::Zero(dim), 0, Rng(seed)};
}

DualVector stochastic_gradient(const VectorRef& x, const ObservationSet& obs,
                               const BlockOperator& op, std::size_t i, double exponent) {
  if (i >= op.block_count() || i >= obs.blocks.size()) throw DimensionError("block index out of range");
  const Vector residual = op.apply(i, x) - obs.blocks[i];
  const SpaceDescriptor residual_space(op.output_space().r(), exponent);
  return op.apply_adjoint(i, duality_map(residual, residual_space));
}

namespace {

void dual_update(IterationState& state, const DualVector& g, double mu,
                 const SpaceDescriptor& x_space) {
  state.dual_x -= mu * g;
  state.x = inverse_duality_map(state.dual_x, x_space);
  ++state.k;
}

}  // namespace

IterationState sgd_step(IterationState state, const BlockOperator& op, const ObservationSet& obs,
                        const SolverConfig& cfg, double mu) {
  const std::size_t i = state.rng.index(op.block_count());
  const DualVector g = stochastic_gradient(state.x, obs, op, i, cfg.residual_exponent());
  dual_update(state, g, mu, cfg.x_space);
  return state;
}

IterationState landweber_step(IterationState state, const BlockOperator& op,
                              const ObservationSet& obs, const SolverConfig& cfg, double mu) {
  DualVector g = DualVector::Zero(op.input_dim());
  for (std::size_t i = 0; i < op.block_count(); ++i) {
    g += stochastic_gradient(state.x, obs, op, i, cfg.residual_exponent());
  }
  dual_update(state, g, mu, cfg.x_space);
  return state;
}

double theoretical_max_step(const ConstantsConfig& constants, double l_max, double p_conj) {
  require_positive(constants.g_pstar, "G_{p*}");
  require_positive(l_max, "L_max");
  if (!(p_conj > 1.0)) throw InvalidInput("p* must exceed 1");
  const double bound = p_conj / (constants.g_pstar * std::pow(l_max, p_conj));
  return std::pow(bound, 1.0 / (p_conj - 1.0));
}

ConstantsConfig estimate_constants(const SpaceDescriptor& desc, Eigen::Index dim,
                                   std::size_t samples, std::uint64_t seed) {
  if (dim < 1 || samples < 1) throw ConfigurationError("estimate_constants needs dim, samples >= 1");
  const SpaceDescriptor dual = desc.dual();
  Rng rng(seed);
  auto gaussian = [&] {
    Vector v(dim);
    for (Eigen::Index j = 0; j < dim; ++j) v[j] = rng.normal();
    return v;
  };
  // Alternate far pairs with near pairs at log-uniform relative distances:
  // the extreme ratios sit at either end.
  auto draw_pair = [&](std::size_t s, Vector& z, Vector& w) {
    z = gaussian();
    if (s % 2 == 0) {
      w = gaussian();
    } else {
      const double eps = std::pow(10.0, rng.uniform(-3.0, 0.0));
      w = z + eps * z.norm() / std::sqrt(static_cast<double>(dim)) * gaussian();
    }
  };

  double c_min = std::numeric_limits<double>::infinity();
  double g_max = 0.0;
  Vector z, w;
  for (std::size_t s = 0; s < samples; ++s) {
    draw_pair(s, z, w);
    const double dp = lr_norm(w - z, desc.r());
    if (dp > 0.0) c_min = std::min(c_min, desc.p() * bregman_distance(z, w, desc) / std::pow(dp, desc.p()));
    draw_pair(s, z, w);
    const double dd = lr_norm(w - z, dual.r());
    if (dd > 0.0) g_max = std::max(g_max, dual.p() * bregman_distance(z, w, dual) / std::pow(dd, dual.p()));
  }
  ConstantsConfig out;
  out.c_p = 0.8 * (std::isfinite(c_min) ? c_min : 1.0);
  out.g_pstar = 1.2 * (g_max > 0.0 ? g_max : 1.0);
  out.estimation_samples = samples;
  if (!(out.c_p > 0.0)) out.c_p = std::numeric_limits<double>::min();
  return out;
}

// ---------------------------------------------------------------------------

StepContext make_step_context(const BlockOperator& op, const SolverConfig& cfg, double l_max) {
  StepContext ctx;
  ctx.n_batches = is_landweber(cfg) ? 1 : op.block_count();
  ctx.p_conj = cfg.x_space.p_conj();
  ctx.l_max = l_max > 0.0 ? l_max : max_block_norm(op, cfg.x_space.r(), cfg.y_space.r());
  return ctx;
}

namespace {

constexpr double kDivergenceFactor = 1e8;

EpochRow make_row(std::size_t epoch, const IterationState& state, const BlockOperator& op,
                  const ObservationSet& obs, const SolverConfig& cfg, const References& refs,
                  double mu) {
  EpochRow row;
  row.epoch = epoch;
  row.objective = objective(state.x, op, obs, cfg.residual_exponent());
  row.residual = residual_norm(state.x, op, obs);
  if (refs.x_hat) row.bregman = bregman_distance(state.x, state.dual_x, *refs.x_hat, cfg.x_space);
  if (refs.x_dagger) {
    const DeltaMetrics d = delta_metrics(state.x, *refs.x_dagger);
    row.delta1 = d.delta1;
    row.delta2 = d.delta2;
  }
  row.step = mu;
  return row;
}

}  // namespace

RunResult run(const BlockOperator& op, const ObservationSet& obs, const SolverConfig& cfg,
              const References& refs, double l_max, const EpochObserver& observer) {
  cfg.validate();
  check_problem(op, obs);
  const bool needs_l_max = std::holds_alternative<PaperSchedule>(cfg.schedule.variant());
  const StepContext ctx = make_step_context(op, cfg, needs_l_max ? l_max : 1.0);

  const bool landweber = is_landweber(cfg);
  const std::uint64_t per_epoch = landweber ? 1 : op.block_count();
  const std::uint64_t budget = cfg.epochs * per_epoch;
  std::uint64_t target = std::visit(
      Overloaded{[&](const MaxEpochs& m) { return m.epochs * per_epoch; },
                 [&](const APriori& a) { return a_priori_stop_index(a); }},
      cfg.stopping);

  RunResult result{{}, IterationState::initial(op.input_dim(), cfg.seed), target, target <= budget};
  const std::uint64_t total = std::min(target, budget);
  IterationState& state = result.state;
  result.record.rows.push_back(make_row(0, state, op, obs, cfg, refs, 0.0));
  const double initial_objective = result.record.rows.front().objective;
  if (observer) observer(result.record.rows.front(), state);

  double mu = 0.0;
  std::uint64_t step = 0;
  try {
    while (state.k < total) {
      step = state.k + 1;
      mu = step_size(cfg.schedule, state.k + 1, ctx);
      state = landweber ? landweber_step(std::move(state), op, obs, cfg, mu)
                        : sgd_step(std::move(state), op, obs, cfg, mu);
      if (state.k % per_epoch == 0 || state.k == total) {
        const std::size_t epoch = static_cast<std::size_t>((state.k + per_epoch - 1) / per_epoch);
        const EpochRow& row = result.record.rows.emplace_back(make_row(epoch, state, op, obs, cfg, refs, mu));
        if (!std::isfinite(row.objective) || !std::isfinite(row.bregman) || !std::isfinite(row.delta1)) {
          throw InvalidInput("non-finite metrics at epoch " + std::to_string(epoch));
        }
        // Runaway growth of the objective means the step is beyond the stable range.
        if (row.objective > kDivergenceFactor * std::max(initial_objective, 1e-300)) {
          throw InvalidInput("objective grew by more than 1e8 by epoch " + std::to_string(epoch));
        }
        if (observer) observer(row, state);
      }
    }
  } catch (const InvalidInput& e) {
    throw InvariantViolation("iteration diverged at step " + std::to_string(step) + ": " +
                             e.what());
  }
  return result;
}

}  // namespace bsgd
