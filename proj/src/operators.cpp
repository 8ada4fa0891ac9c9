#include "bsgd/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bsgd/errors.hpp"
#include "bsgd/rng.hpp"

namespace bsgd {

BlockOperator::BlockOperator(std::vector<Matrix> blocks,
                             std::vector<std::vector<Eigen::Index>> rows,
                             SpaceDescriptor output_space)
    : blocks_(std::move(blocks)), rows_(std::move(rows)), output_space_(output_space) {
  if (blocks_.empty()) throw ConfigurationError("block operator needs at least one block");
  if (rows_.size() != blocks_.size()) throw DimensionError("one row map per block required");
  input_dim_ = blocks_.front().cols();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].cols() != input_dim_) {
      throw DimensionError("block " + std::to_string(i) + " has " +
                           std::to_string(blocks_[i].cols()) + " columns, expected " +
                           std::to_string(input_dim_));
    }
    if (static_cast<Eigen::Index>(rows_[i].size()) != blocks_[i].rows()) {
      throw DimensionError("row map of block " + std::to_string(i) + " has wrong length");
    }
    output_dim_ += blocks_[i].rows();
  }
  std::vector<char> seen(static_cast<std::size_t>(output_dim_), 0);
  for (const auto& map : rows_) {
    for (auto r : map) {
      if (r < 0 || r >= output_dim_ || seen[static_cast<std::size_t>(r)]) {
        throw DimensionError("row maps do not form a permutation");
      }
      seen[static_cast<std::size_t>(r)] = 1;
    }
  }
  sparse_.resize(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto nnz = (blocks_[i].array() != 0.0).count();
    if (nnz > 0 && 10 * nnz <= blocks_[i].size()) sparse_[i] = blocks_[i].sparseView();
  }
}

const Matrix& BlockOperator::block(std::size_t i) const {
  if (i >= blocks_.size()) throw DimensionError("block index out of range");
  return blocks_[i];
}

const std::vector<Eigen::Index>& BlockOperator::block_rows(std::size_t i) const {
  if (i >= rows_.size()) throw DimensionError("block index out of range");
  return rows_[i];
}

Vector BlockOperator::apply(std::size_t i, const VectorRef& x) const {
  const Matrix& a = block(i);
  if (x.size() != a.cols()) throw DimensionError("apply: input length mismatch");
  if (sparse_[i].nonZeros() > 0) return sparse_[i] * x;
  return a * x;
}

DualVector BlockOperator::apply_adjoint(std::size_t i, const VectorRef& ys) const {
  const Matrix& a = block(i);
  if (ys.size() != a.rows()) throw DimensionError("apply_adjoint: input length mismatch");
  if (sparse_[i].nonZeros() > 0) return sparse_[i].transpose() * ys;
  return a.transpose() * ys;
}

Matrix BlockOperator::assemble() const {
  Matrix full(output_dim_, input_dim_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    for (std::size_t k = 0; k < rows_[i].size(); ++k) {
      full.row(rows_[i][k]) = blocks_[i].row(static_cast<Eigen::Index>(k));
    }
  }
  return full;
}

std::vector<Vector> BlockOperator::split(const VectorRef& full) const {
  if (full.size() != output_dim_) throw DimensionError("split: data length mismatch");
  std::vector<Vector> parts;
  parts.reserve(blocks_.size());
  for (const auto& map : rows_) {
    Vector part(static_cast<Eigen::Index>(map.size()));
    for (std::size_t k = 0; k < map.size(); ++k) part[static_cast<Eigen::Index>(k)] = full[map[k]];
    parts.push_back(std::move(part));
  }
  return parts;
}

Vector BlockOperator::merge(const std::vector<Vector>& parts) const {
  if (parts.size() != rows_.size()) throw DimensionError("merge: wrong number of parts");
  Vector full(output_dim_);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].size() != static_cast<Eigen::Index>(rows_[i].size())) {
      throw DimensionError("merge: part length mismatch");
    }
    for (std::size_t k = 0; k < rows_[i].size(); ++k) {
      full[rows_[i][k]] = parts[i][static_cast<Eigen::Index>(k)];
    }
  }
  return full;
}

BlockOperator partition_rows(const MatrixRef& full, std::size_t n_batches,
                             const SpaceDescriptor& output_space) {
  const auto m = static_cast<std::size_t>(full.rows());
  if (n_batches == 0 || m == 0 || m % n_batches != 0) {
    throw ConfigurationError("number of batches (" + std::to_string(n_batches) +
                             ") must divide the row count (" + std::to_string(m) + ")");
  }
  const std::size_t per_block = m / n_batches;
  std::vector<Matrix> blocks;
  std::vector<std::vector<Eigen::Index>> rows;
  blocks.reserve(n_batches);
  rows.reserve(n_batches);
  for (std::size_t j = 0; j < n_batches; ++j) {
    Matrix b(static_cast<Eigen::Index>(per_block), full.cols());
    std::vector<Eigen::Index> map(per_block);
    for (std::size_t k = 0; k < per_block; ++k) {
      map[k] = static_cast<Eigen::Index>(j + k * n_batches);
      b.row(static_cast<Eigen::Index>(k)) = full.row(map[k]);
    }
    blocks.push_back(std::move(b));
    rows.push_back(std::move(map));
  }
  return {std::move(blocks), std::move(rows), output_space};
}

ObservationSet ObservationSet::from_full(const BlockOperator& op, const VectorRef& full,
                                         double noise_level) {
  if (!full.allFinite()) throw InvalidInput("observation data has non-finite entries");
  if (noise_level < 0.0) throw InvalidInput("noise level must be non-negative");
  return {op.split(full), noise_level};
}

// ---------------------------------------------------------------------------

double integral_kernel(double t, double s) {
  return t <= s ? 40.0 * t * (1.0 - s) : 40.0 * s * (1.0 - t);
}

Matrix build_integral_operator(int n, bool midpoint_columns) {
  if (n < 2) throw ConfigurationError("integral operator needs n >= 2");
  Matrix a(n, n);
  const double h = 1.0 / n;
  for (int k = 0; k < n; ++k) {
    const double s = midpoint_columns ? (2.0 * k + 1.0) / (2.0 * n) : (2.0 * k + 1.0) / n;
    for (int j = 0; j < n; ++j) {
      const double t = static_cast<double>(j) / n;
      a(j, k) = h * integral_kernel(t, s);
    }
  }
  return a;
}

double exact_sparse_profile(double s) {
  if (s >= 19.0 / 40.0 && s <= 21.0 / 40.0) return 2.0;
  if ((s >= 9.0 / 40.0 && s <= 11.0 / 40.0) || (s >= 29.0 / 40.0 && s <= 31.0 / 40.0)) return 1.0;
  return 0.0;
}

PrimalVector exact_sparse_signal(int n) {
  if (n < 40) throw ConfigurationError("exact signal needs n >= 40 to resolve its support");
  PrimalVector x(n);
  for (int j = 0; j < n; ++j) x[j] = exact_sparse_profile((2.0 * j + 1.0) / (2.0 * n));
  return x;
}

// ---------------------------------------------------------------------------

void RadonGeometry::validate() const {
  if (grid_side < 1 || n_angles < 1 || n_detectors < 1) {
    throw ConfigurationError("radon geometry counts must be >= 1");
  }
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) {
    throw ConfigurationError("pixel size must be positive");
  }
  if (!(angle_step >= 0.0) || n_angles * angle_step > 180.0 + 1e-9) {
    throw ConfigurationError("angular coverage n_angles * angle_step must not exceed 180 degrees");
  }
}

double RadonGeometry::detector_spacing() const {
  return grid_side * pixel_size * std::numbers::sqrt2 / n_detectors;
}

double RadonGeometry::detector_offset(int d) const {
  return (d - 0.5 * (n_detectors - 1)) * detector_spacing();
}

double RadonGeometry::angle_radians(int a) const {
  return a * angle_step * std::numbers::pi / 180.0;
}

namespace {

// Parameter interval of p0 + t u inside [-h, h] along one axis; false if empty.
bool clip_axis(double p0, double u, double h, double& t0, double& t1) {
  constexpr double kParallel = 1e-12;
  if (std::abs(u) < kParallel) return std::abs(p0) <= h;
  double a = (-h - p0) / u;
  double b = (h - p0) / u;
  if (a > b) std::swap(a, b);
  t0 = std::max(t0, a);
  t1 = std::min(t1, b);
  return t0 < t1;
}

void trace_ray(double theta, double offset, const RadonGeometry& g, Eigen::Ref<Eigen::RowVectorXd> row,
               std::vector<double>& alphas) {
  const double ps = g.pixel_size;
  const double h = 0.5 * g.grid_side * ps;
  const double ux = std::cos(theta);
  const double uy = std::sin(theta);
  const double px = -offset * uy;
  const double py = offset * ux;

  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  if (!clip_axis(px, ux, h, t0, t1) || !clip_axis(py, uy, h, t0, t1)) return;
  if (!std::isfinite(t0) || !std::isfinite(t1) || t1 <= t0) return;

  alphas.clear();
  alphas.push_back(t0);
  alphas.push_back(t1);
  constexpr double kParallel = 1e-12;
  for (int c = 0; c <= g.grid_side; ++c) {
    const double line = -h + c * ps;
    if (std::abs(ux) >= kParallel) {
      const double t = (line - px) / ux;
      if (t > t0 && t < t1) alphas.push_back(t);
    }
    if (std::abs(uy) >= kParallel) {
      const double t = (line - py) / uy;
      if (t > t0 && t < t1) alphas.push_back(t);
    }
  }
  std::sort(alphas.begin(), alphas.end());

  const int n = g.grid_side;
  for (std::size_t k = 0; k + 1 < alphas.size(); ++k) {
    const double len = alphas[k + 1] - alphas[k];
    if (len <= 0.0) continue;
    const double tm = 0.5 * (alphas[k] + alphas[k + 1]);
    const double x = px + tm * ux;
    const double y = py + tm * uy;
    const int col = std::clamp(static_cast<int>(std::floor((x + h) / ps)), 0, n - 1);
    const int r = std::clamp(static_cast<int>(std::floor((h - y) / ps)), 0, n - 1);
    row[r * n + col] += len;
  }
}

}  // namespace

Matrix build_radon_operator(const RadonGeometry& geom) {
  geom.validate();
  const Eigen::Index rows = static_cast<Eigen::Index>(geom.n_angles) * geom.n_detectors;
  const Eigen::Index cols = static_cast<Eigen::Index>(geom.grid_side) * geom.grid_side;
  // Row-major fill, then one conversion; rows are written independently.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(rows, cols);
  std::vector<double> alphas;
  alphas.reserve(static_cast<std::size_t>(4 * geom.grid_side + 4));
  for (int ai = 0; ai < geom.n_angles; ++ai) {
    const double theta = geom.angle_radians(ai);
    for (int d = 0; d < geom.n_detectors; ++d) {
      trace_ray(theta, geom.detector_offset(d), geom,
                a.row(static_cast<Eigen::Index>(ai) * geom.n_detectors + d), alphas);
    }
  }
  return a;
}

namespace {

struct Disk {
  double cx, cy, radius, value;  // in units of the grid side
};

constexpr Disk kPhantomDisks[] = {
    {0.30, 0.30, 0.11, 1.0},
    {0.68, 0.34, 0.08, 2.0},
    {0.48, 0.70, 0.12, 1.0},
    {0.78, 0.72, 0.06, 2.0},
};

}  // namespace

PrimalVector sparse_disk_phantom(int grid_side) {
  if (grid_side < 16) throw ConfigurationError("phantom needs grid_side >= 16");
  PrimalVector img = PrimalVector::Zero(static_cast<Eigen::Index>(grid_side) * grid_side);
  for (int r = 0; r < grid_side; ++r) {
    for (int c = 0; c < grid_side; ++c) {
      const double x = (c + 0.5) / grid_side;
      const double y = (r + 0.5) / grid_side;
      for (const Disk& d : kPhantomDisks) {
        if ((x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy) <= d.radius * d.radius) {
          img[r * grid_side + c] = d.value;
        }
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------

namespace {

NormEstimate boyd_from(const MatrixRef& a, Vector x, double rx, double ry, double tol, int max_iter) {
  const SpaceDescriptor x_space(rx, rx);
  const SpaceDescriptor y_space(ry, ry);
  NormEstimate est;
  x /= lr_norm(x, rx);
  double value = lr_norm(a * x, ry);
  for (int it = 1; it <= max_iter; ++it) {
    const Vector ax = a * x;
    // J_{ry}(Ax) with power ry: |Ax|^{ry-1} sign(Ax); rescaling is harmless.
    const Vector u = duality_map(ax, y_space);
    const Vector z = a.transpose() * u;
    if (z.cwiseAbs().maxCoeff() == 0.0) {
      est.converged = true;
      break;
    }
    Vector next = inverse_duality_map(z, x_space);
    next /= lr_norm(next, rx);
    const double next_value = lr_norm(a * next, ry);
    est.iterations = it;
    est.history.push_back(next_value);
    const bool done = std::abs(next_value - value) <= tol * std::max(next_value, 1e-300);
    x = std::move(next);
    value = std::max(value, next_value);
    if (done) {
      est.converged = true;
      break;
    }
  }
  est.value = value;
  est.argmax = std::move(x);
  return est;
}

}  // namespace

NormEstimate boyd_operator_norm(const MatrixRef& a, double rx, double ry, double tol, int max_iter,
                                std::uint64_t seed, int restarts) {
  if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) {
    NormEstimate est;
    est.converged = true;
    return est;
  }
  Rng rng(seed);
  Vector x(a.cols());
  for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = rng.uniform(0.5, 1.5);
  NormEstimate best = boyd_from(a, x, rx, ry, tol, max_iter);

  int total = best.iterations;
  for (int r = 0; r < restarts; ++r) {
    if (r == 0 && !(rx == 2.0 && ry == 2.0)) {
      // Dominant right singular direction.
      x = boyd_from(a, x, 2.0, 2.0, tol, max_iter).argmax;
    } else {
      for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = rng.normal();
    }
    NormEstimate candidate = boyd_from(a, x, rx, ry, tol, max_iter);
    total += candidate.iterations;
    if (candidate.value > best.value) best = std::move(candidate);
  }
  best.iterations = total;
  return best;
}

double max_block_norm(const BlockOperator& op, double rx, double ry, double tol, int max_iter,
                      std::uint64_t seed, int restarts) {
  double best = 0.0;
  for (std::size_t i = 0; i < op.block_count(); ++i) {
    best = std::max(best,
                    boyd_operator_norm(op.block(i), rx, ry, tol, max_iter, seed + i, restarts).value);
  }
  return best;
}

}  // namespace bsgd
