#include "bsgd/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/SVD>

#include "bsgd/errors.hpp"

namespace bsgd {

double objective(const VectorRef& x, const BlockOperator& op, const ObservationSet& obs,
                 double exponent) {
  if (obs.blocks.size() != op.block_count()) throw DimensionError("objective: block count mismatch");
  const double r = op.output_space().r();
  double sum = 0.0;
  for (std::size_t i = 0; i < op.block_count(); ++i) {
    const Vector res = op.apply(i, x) - obs.blocks[i];
    sum += std::pow(lr_norm(res, r), exponent) / exponent;
  }
  return sum / static_cast<double>(op.block_count());
}

double residual_norm(const VectorRef& x, const BlockOperator& op, const ObservationSet& obs) {
  if (obs.blocks.size() != op.block_count()) throw DimensionError("residual: block count mismatch");
  Vector all(op.output_dim());
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < op.block_count(); ++i) {
    const Vector res = op.apply(i, x) - obs.blocks[i];
    all.segment(offset, res.size()) = res;
    offset += res.size();
  }
  return lr_norm(all, op.output_space().r());
}

DeltaMetrics delta_metrics(const VectorRef& x, const VectorRef& x_dagger) {
  if (x.size() != x_dagger.size()) throw DimensionError("delta_metrics: length mismatch");
  const double ref1 = x_dagger.lpNorm<1>();
  if (ref1 == 0.0) throw InvalidInput("delta metrics need a nonzero reference");
  const Vector diff = x_dagger - x;
  return {diff.lpNorm<1>() / ref1, diff.norm() / x_dagger.norm()};
}

double support_f1(const VectorRef& x, const VectorRef& x_dagger, double threshold) {
  if (x.size() != x_dagger.size()) throw DimensionError("support_f1: length mismatch");
  if (!(threshold > 0.0)) throw InvalidInput("support threshold must be positive");
  std::size_t tp = 0;
  std::size_t predicted = 0;
  std::size_t actual = 0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const bool p = std::abs(x[j]) > threshold;
    const bool a = x_dagger[j] != 0.0;
    predicted += p;
    actual += a;
    tp += p && a;
  }
  if (predicted + actual == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(predicted + actual);
}

double default_support_threshold(const VectorRef& x_dagger) {
  return 0.1 * x_dagger.cwiseAbs().maxCoeff();
}

std::vector<double> polyak_bound(double delta0, double alpha, const std::vector<double>& steps) {
  if (!(delta0 >= 0.0)) throw InvalidInput("polyak_bound needs delta0 >= 0");
  if (!(alpha > 0.0)) throw InvalidInput("polyak_bound needs alpha > 0");
  std::vector<double> out;
  out.reserve(steps.size());
  double sum = 0.0;
  for (double mu : steps) {
    if (!(mu > 0.0)) throw InvalidInput("polyak_bound needs positive steps");
    sum += mu;
    out.push_back(delta0 == 0.0
                      ? 0.0
                      : delta0 * std::pow(1.0 + alpha * std::pow(delta0, alpha) * sum, -1.0 / alpha));
  }
  return out;
}

std::vector<double> rate_envelope(double delta0, double alpha, const std::vector<double>& per_step) {
  if (!(alpha >= 1.0)) throw InvalidInput("rate_envelope needs alpha >= 1");
  if (!(delta0 >= 0.0)) throw InvalidInput("rate_envelope needs delta0 >= 0");
  std::vector<double> out;
  out.reserve(per_step.size());
  double sum = 0.0;
  for (double v : per_step) {
    sum += v;
    if (alpha == 1.0) {
      out.push_back(delta0 * std::exp(-sum));
    } else {
      const double a = alpha - 1.0;
      out.push_back(delta0 * std::pow(1.0 + a * std::pow(delta0, a) * sum, -1.0 / a));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

double column_value(const EpochRow& row, Column column) {
  switch (column) {
    case Column::objective:
      return row.objective;
    case Column::residual:
      return row.residual;
    case Column::bregman:
      return row.bregman;
    case Column::delta1:
      return row.delta1;
    case Column::delta2:
      return row.delta2;
    case Column::step:
      return row.step;
  }
  return 0.0;
}

EnsembleSummary summarize(std::vector<ConvergenceRecord> records, Column column) {
  if (records.size() < 2) throw ConfigurationError("ensemble statistics need at least 2 seeds");
  EnsembleSummary out;
  const std::size_t rows = records.front().rows.size();
  for (const auto& r : records) {
    if (r.rows.size() != rows) throw DimensionError("ensemble records have different lengths");
  }
  const auto n = static_cast<double>(records.size());
  for (std::size_t e = 0; e < rows; ++e) {
    double sum = 0.0;
    for (const auto& r : records) sum += column_value(r.rows[e], column);
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : records) {
      const double d = column_value(r.rows[e], column) - mean;
      ss += d * d;
    }
    out.epochs.push_back(records.front().rows[e].epoch);
    out.mean.push_back(mean);
    out.std_error.push_back(std::sqrt(ss / (n - 1.0) / n));
  }
  out.records = std::move(records);
  return out;
}

EnsembleSummary monte_carlo_mean(const BlockOperator& op, const ObservationSet& obs,
                                 const SolverConfig& cfg, const References& refs,
                                 std::size_t n_seeds, Column column, unsigned jobs, double l_max) {
  if (n_seeds < 2) throw ConfigurationError("monte_carlo_mean needs n_seeds >= 2");
  cfg.validate();
  if (std::holds_alternative<PaperSchedule>(cfg.schedule.variant()) && !(l_max > 0.0)) {
    l_max = make_step_context(op, cfg).l_max;
  }
  std::vector<ConvergenceRecord> records(n_seeds);
  parallel_for(n_seeds, jobs, [&](std::size_t s) {
    SolverConfig seeded = cfg;
    seeded.seed = cfg.seed + s;
    records[s] = run(op, obs, seeded, refs, l_max).record;
  });
  return summarize(std::move(records), column);
}

std::vector<StabilityRow> stability_probe(const BlockOperator& op, const VectorRef& clean_data,
                                          const SolverConfig& cfg, std::uint64_t k_fixed,
                                          const std::vector<double>& deltas, std::size_t n_seeds,
                                          std::uint64_t noise_seed, unsigned jobs, double l_max) {
  cfg.validate();
  if (n_seeds < 1) throw ConfigurationError("stability_probe needs at least one seed");
  const bool landweber = std::holds_alternative<Landweber>(cfg.method);
  const StepContext ctx = make_step_context(op, cfg, l_max);
  const ObservationSet clean = ObservationSet::from_full(op, clean_data);
  const double r_y = op.output_space().r();

  auto advance = [&](IterationState s, const ObservationSet& obs) {
    while (s.k < k_fixed) {
      const double mu = step_size(cfg.schedule, s.k + 1, ctx);
      s = landweber ? landweber_step(std::move(s), op, obs, cfg, mu)
                    : sgd_step(std::move(s), op, obs, cfg, mu);
    }
    return s;
  };

  // samples[d][s] = (bregman, primal, dual)
  std::vector<std::vector<std::array<double, 3>>> samples(
      deltas.size(), std::vector<std::array<double, 3>>(n_seeds));
  parallel_for(n_seeds, jobs, [&](std::size_t s) {
    const std::uint64_t seed = cfg.seed + s;
    const IterationState reference = advance(IterationState::initial(op.input_dim(), seed), clean);
    Rng rng(noise_seed + s);
    Vector direction(clean_data.size());
    for (Eigen::Index j = 0; j < direction.size(); ++j) direction[j] = rng.normal();
    direction /= lr_norm(direction, r_y);
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      const Vector noisy_data = clean_data + deltas[d] * direction;
      const ObservationSet noisy = ObservationSet::from_full(op, noisy_data, deltas[d]);
      const IterationState perturbed = advance(IterationState::initial(op.input_dim(), seed), noisy);
      samples[d][s] = {
          bregman_distance(perturbed.x, perturbed.dual_x, reference.x, cfg.x_space),
          lr_norm(perturbed.x - reference.x, cfg.x_space.r()),
          lr_norm(perturbed.dual_x - reference.dual_x, cfg.x_space.r_conj())};
    }
  });

  std::vector<StabilityRow> out;
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    StabilityRow row;
    row.delta = deltas[d];
    for (const auto& v : samples[d]) {
      row.bregman += v[0];
      row.primal += v[1];
      row.dual += v[2];
    }
    const auto n = static_cast<double>(n_seeds);
    row.bregman /= n;
    row.primal /= n;
    row.dual /= n;
    out.push_back(row);
  }
  return out;
}

}  // namespace bsgd

namespace bsgd {

namespace {

// d/dt (1/r) sum |u_j + t v_j|^r
double line_derivative(const Vector& u, const Vector& v, double t, double r) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double w = u[j] + t * v[j];
    if (w != 0.0) sum += std::copysign(std::pow(std::abs(w), r - 1.0), w) * v[j];
  }
  return sum;
}

}  // namespace

PrimalVector minimum_norm_solution(const MatrixRef& a, const VectorRef& y, double r) {
  if (a.rows() != y.size()) throw DimensionError("minimum_norm_solution: data length mismatch");
  if (!(r > 1.0)) throw InvalidInput("minimum_norm_solution needs r > 1");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double tol = 1e-10 * (sigma.size() > 0 ? sigma[0] : 0.0);
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma[rank] > tol) ++rank;

  const Matrix& u = svd.matrixU();
  const Matrix& v = svd.matrixV();
  Vector coeff = u.leftCols(rank).transpose() * y;
  coeff.array() /= sigma.head(rank).array();
  Vector particular = v.leftCols(rank) * coeff;

  const Eigen::Index nullity = a.cols() - rank;
  if (r == 2.0 || nullity == 0) return particular;

  if (nullity == 1) {
    const Vector dir = v.col(rank);
    double lo = -1.0;
    double hi = 1.0;
    while (line_derivative(particular, dir, lo, r) > 0.0) lo *= 2.0;
    while (line_derivative(particular, dir, hi, r) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (line_derivative(particular, dir, mid, r) < 0.0 ? lo : hi) = mid;
    }
    return particular + 0.5 * (lo + hi) * dir;
  }

  const Matrix basis = v.rightCols(nullity);
  Vector current = particular;
  double eps = std::max(1e-3, current.cwiseAbs().maxCoeff());
  for (int it = 0; it < 200; ++it) {
    const Vector weights =
        (current.array().square() + eps * eps).pow(0.5 * (r - 2.0)).matrix();
    const Matrix weighted = basis.transpose() * weights.asDiagonal();
    const Matrix normal = weighted * basis;
    const Vector t = normal.ldlt().solve(-(weighted * particular));
    current = particular + basis * t;
    eps = std::max(eps * 0.5, 1e-12);
  }
  return current;
}

}  // namespace bsgd

namespace bsgd {

PrimalVector landweber_solution(const MatrixRef& a, const VectorRef& y, const SpaceDescriptor& x_space,
                                const SpaceDescriptor& y_space, std::size_t steps) {
  if (a.rows() != y.size()) throw DimensionError("landweber_solution: rows != data length");
  const double norm = boyd_operator_norm(a, x_space.r(), y_space.r(), 1e-10).value;
  if (norm == 0.0) return PrimalVector::Zero(a.cols());
  const ConstantsConfig constants = estimate_constants(x_space, a.cols(), 2000, 0);
  const double mu = 0.5 * theoretical_max_step(constants, norm, x_space.p_conj());
  PrimalVector x = PrimalVector::Zero(a.cols());
  DualVector z = DualVector::Zero(a.cols());
  for (std::size_t k = 0; k < steps; ++k) {
    const Vector r = a * x - y;
    z.noalias() -= mu * (a.transpose() * duality_map(r, y_space));
    x = inverse_duality_map(z, x_space);
  }
  if (!x.allFinite()) throw InvariantViolation("landweber_solution diverged");
  return x;
}

PrimalVector reference_solution(const MatrixRef& a, const VectorRef& y, const SpaceDescriptor& x_space,
                                const SpaceDescriptor& y_space) {
  if (x_space.is_hilbert()) return minimum_norm_solution(a, y, 2.0);
  return landweber_solution(a, y, x_space, y_space);
}

}  // namespace bsgd
