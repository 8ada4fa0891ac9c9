#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bsgd/spaces.hpp"

namespace bsgd {

using Matrix = Eigen::MatrixXd;
using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Row-partitioned forward operator A = [A_0; ...; A_{N-1}].
///
/// Each block remembers which rows of the original matrix it holds, so data
/// vectors ordered like the original rows can be split and reassembled.
class BlockOperator {
 public:
  /// rows[i][k] is the original row index of row k of blocks[i]. The row
  /// maps must form a permutation of 0..M-1 where M is the total row count.
  BlockOperator(std::vector<Matrix> blocks, std::vector<std::vector<Eigen::Index>> rows,
                SpaceDescriptor output_space);

  std::size_t block_count() const noexcept { return blocks_.size(); }
  Eigen::Index input_dim() const noexcept { return input_dim_; }
  Eigen::Index output_dim() const noexcept { return output_dim_; }
  const Matrix& block(std::size_t i) const;
  const std::vector<Eigen::Index>& block_rows(std::size_t i) const;
  const SpaceDescriptor& output_space() const noexcept { return output_space_; }

  /// A_i x.
  Vector apply(std::size_t i, const VectorRef& x) const;
  /// A_i^T ys.
  DualVector apply_adjoint(std::size_t i, const VectorRef& ys) const;

  /// Original row order reassembled from the blocks.
  Matrix assemble() const;

  /// Splits a vector in original row order into per-block pieces.
  std::vector<Vector> split(const VectorRef& full) const;
  /// Inverse of split.
  Vector merge(const std::vector<Vector>& parts) const;

 private:
  std::vector<Matrix> blocks_;
  std::vector<SparseMatrix> sparse_;  // empty entries for dense blocks
  std::vector<std::vector<Eigen::Index>> rows_;
  SpaceDescriptor output_space_;
  Eigen::Index input_dim_ = 0;
  Eigen::Index output_dim_ = 0;
};

/// Block j takes rows j, j + N_b, j + 2 N_b, ... of the full matrix.
/// Throws ConfigurationError if N_b does not divide the row count.
BlockOperator partition_rows(const MatrixRef& full, std::size_t n_batches,
                             const SpaceDescriptor& output_space);

/// Per-block data y_i together with the realized noise level ||y^delta - y||.
struct ObservationSet {
  std::vector<Vector> blocks;
  double noise_level = 0.0;

  /// Splits data given in original row order; noise_level is recorded as is.
  static ObservationSet from_full(const BlockOperator& op, const VectorRef& full,
                                  double noise_level = 0.0);
};

// ---------------------------------------------------------------------------
// Integral equation model problem on (0, 1).

/// Green's-function type kernel 40 t (1 - s) for t <= s, 40 s (1 - t) else.
double integral_kernel(double t, double s);

/// (1/n) kappa(t_j, s_k) with t_j = j / n (0-based j). Column nodes are the
/// midpoints (2k + 1) / (2n) by default; midpoint_columns = false uses the
/// literal nodes (2k + 1) / n. Throws ConfigurationError for n < 2.
Matrix build_integral_operator(int n, bool midpoint_columns = true);

/// Piecewise constant test signal: 1 on [9/40, 11/40] and [29/40, 31/40],
/// 2 on [19/40, 21/40], 0 elsewhere.
double exact_sparse_profile(double s);

/// exact_sparse_profile sampled at the cell midpoints (2j + 1) / (2n).
PrimalVector exact_sparse_signal(int n);

// ---------------------------------------------------------------------------
// 2D parallel-beam tomography.

struct RadonGeometry {
  int grid_side = 64;
  int n_angles = 60;
  double angle_step = 3.0;  // degrees
  int n_detectors = 95;
  double pixel_size = 0.1;

  /// Throws ConfigurationError on non-positive counts or more than 180 deg.
  void validate() const;
  double detector_spacing() const;
  double detector_offset(int d) const;
  double angle_radians(int a) const;
};

/// Dense system matrix with one row per (angle, detector) pair, row index
/// a * n_detectors + d, and one column per pixel in row-major order (row 0 at
/// the top). Entries are exact ray/pixel intersection lengths in physical
/// units. Ray a runs along (cos t_a, sin t_a) at signed offset s_d along the
/// normal (-sin t_a, cos t_a); the detector array spans the grid's
/// circumscribed circle.
Matrix build_radon_operator(const RadonGeometry& geom);

/// Few disjoint constant-intensity disks (values 1 and 2) on zero
/// background. Throws ConfigurationError for grid_side < 16.
PrimalVector sparse_disk_phantom(int grid_side);

// ---------------------------------------------------------------------------
// Operator norms between l^r spaces.

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // estimate after each iteration of the best start
  Vector argmax;                // unit-norm maximizer of the best start
};

/// Boyd's power method for ||A||_{l^rx -> l^ry}. Alternates
///   u = J_{ry}(A x),  x <- J_{rx*}(A^T u) / ||.||_rx
/// where J_t denotes the duality map with power t = norm exponent. The
/// returned value is attained by a feasible x, hence a lower bound, and the
/// history is non-decreasing.
///
/// The first start is a strictly positive random vector. The iteration is a
/// local method, so each of the optional `restarts` adds another start (the
/// dominant l^2 right singular direction first, then mixed-sign Gaussian
/// vectors) and the best estimate wins. iterations counts all starts.
NormEstimate boyd_operator_norm(const MatrixRef& a, double rx, double ry, double tol = 1e-12,
                                int max_iter = 1000, std::uint64_t seed = 0, int restarts = 0);

/// max_i ||A_i|| over the blocks of op, one restart per block by default.
double max_block_norm(const BlockOperator& op, double rx, double ry, double tol = 1e-10,
                      int max_iter = 1000, std::uint64_t seed = 0, int restarts = 1);

}  // namespace bsgd
