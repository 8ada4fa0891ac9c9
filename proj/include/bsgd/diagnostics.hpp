#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "bsgd/operators.hpp"
#include "bsgd/solver.hpp"

namespace bsgd {

/// (1/N) sum_i (1/exponent) ||A_i x - y_i||_{r_Y}^exponent.
double objective(const VectorRef& x, const BlockOperator& op, const ObservationSet& obs,
                 double exponent);

/// ||Ax - y|| in l^{r_Y} over all rows.
double residual_norm(const VectorRef& x, const BlockOperator& op, const ObservationSet& obs);

struct DeltaMetrics {
  double delta1 = 0.0;
  double delta2 = 0.0;
};

/// Relative l^1 and l^2 errors against x_dagger. Throws InvalidInput for a
/// zero reference.
DeltaMetrics delta_metrics(const VectorRef& x, const VectorRef& x_dagger);

/// F1 score of supp_t(x) = {|x_j| > threshold} against supp(x_dagger).
/// Both supports empty counts as a perfect match.
double support_f1(const VectorRef& x, const VectorRef& x_dagger, double threshold);

/// Default threshold 0.1 max|x_dagger|.
double default_support_threshold(const VectorRef& x_dagger);

/// bound_N = D0 (1 + alpha D0^alpha sum_{n<=N} mu_n)^{-1/alpha}, N = 1..len.
std::vector<double> polyak_bound(double delta0, double alpha, const std::vector<double>& steps);

/// Expected Bregman bound under conditional stability with exponent alpha:
/// alpha = 1: D0 exp(-sum mu_j C_j); alpha > 1: the algebraic Polyak form.
/// per_step holds the products mu_j C_j. Throws InvalidInput for alpha < 1.
std::vector<double> rate_envelope(double delta0, double alpha, const std::vector<double>& per_step);

/// Minimum l^r-norm solution of the consistent system A x = y.
///
/// The least-squares particular solution and a null-space basis come from an
/// SVD (relative rank tolerance 1e-10). In l^2 the particular solution is the
/// answer; with a one-dimensional null space the l^r norm is minimized along
/// the line by bisection on its monotone derivative; larger null spaces use
/// iteratively reweighted least squares.
PrimalVector minimum_norm_solution(const MatrixRef& a, const VectorRef& y, double r);

/// Deterministic Landweber from x0 = 0 with the full matrix and constant step
/// 0.5 * theoretical_max_step (G estimated by sampling, L = ||A|| by Boyd).
PrimalVector landweber_solution(const MatrixRef& a, const VectorRef& y, const SpaceDescriptor& x_space,
                                const SpaceDescriptor& y_space, std::size_t steps = 100000);

/// Bregman reference for a noiseless problem: the dense least-norm solution
/// when X is Hilbert, otherwise landweber_solution with 1e5 steps.
PrimalVector reference_solution(const MatrixRef& a, const VectorRef& y, const SpaceDescriptor& x_space,
                                const SpaceDescriptor& y_space);

// ---------------------------------------------------------------------------
// Seed ensembles.

enum class Column { objective, residual, bregman, delta1, delta2, step };

double column_value(const EpochRow& row, Column column);

struct EnsembleSummary {
  std::vector<std::size_t> epochs;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::vector<ConvergenceRecord> records;  // in seed order
};

/// Runs seeds cfg.seed .. cfg.seed + n_seeds - 1 on up to `jobs` threads and
/// reduces one column to its per-epoch sample mean and standard error.
/// Aggregation is in seed order. Throws ConfigurationError for n_seeds < 2.
EnsembleSummary monte_carlo_mean(const BlockOperator& op, const ObservationSet& obs,
                                 const SolverConfig& cfg, const References& refs,
                                 std::size_t n_seeds, Column column, unsigned jobs = 1,
                                 double l_max = 0.0);

/// Mean/standard error over seed-ordered records for one column.
EnsembleSummary summarize(std::vector<ConvergenceRecord> records, Column column);

struct StabilityRow {
  double delta = 0.0;
  double bregman = 0.0;   // mean D(x_k^delta, x_k)
  double primal = 0.0;    // mean ||x_k^delta - x_k||_r
  double dual = 0.0;      // mean ||J_p(x_k^delta) - J_p(x_k)||_{r*}
};

/// Couples clean and noisy runs on identical index sequences up to k_fixed
/// iterations. The perturbation for seed s is a standard Gaussian vector
/// drawn with noise seed noise_seed + s and rescaled to l^{r_Y} norm delta.
std::vector<StabilityRow> stability_probe(const BlockOperator& op, const VectorRef& clean_data,
                                          const SolverConfig& cfg, std::uint64_t k_fixed,
                                          const std::vector<double>& deltas, std::size_t n_seeds,
                                          std::uint64_t noise_seed, unsigned jobs = 1,
                                          double l_max = 0.0);

/// Runs fn(0..n-1) on up to `jobs` threads. fn must only write to
/// per-index slots.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace bsgd
