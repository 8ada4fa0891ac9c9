#include "bsgd/spaces.hpp"

#include <cmath>
#include <string>

#include "bsgd/errors.hpp"

namespace bsgd {

namespace {

void require_exponent(double t, const char* name) {
  if (!std::isfinite(t) || t <= 1.0) {
    throw ConfigurationError(std::string(name) + " must satisfy 1 < " + name +
                             " < inf (l^1 and l^inf are not smooth), got " + std::to_string(t));
  }
}

void require_finite(const VectorRef& x) {
  if (!x.allFinite()) throw InvalidInput("vector has non-finite entries");
}

void require_same_length(const VectorRef& a, const VectorRef& b) {
  if (a.size() != b.size()) {
    throw DimensionError("length mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
}

// Scaled by max|x_j| so that neither large r nor tiny entries under/overflow.
double scaled_norm(const VectorRef& x, double r) {
  const double scale = x.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  if (r == 2.0) return scale * (x / scale).norm();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) sum += std::pow(std::abs(x[j]) / scale, r);
  return scale * std::pow(sum, 1.0 / r);
}

}  // namespace

double conjugate_exponent(double t) { return t / (t - 1.0); }

SpaceDescriptor::SpaceDescriptor(double r, double p) : r_(r), p_(p) {
  require_exponent(r, "r");
  require_exponent(p, "p");
}

double lr_norm(const VectorRef& x, double r) {
  require_exponent(r, "r");
  require_finite(x);
  if (x.size() == 0) return 0.0;
  return scaled_norm(x, r);
}

DualVector duality_map(const VectorRef& x, const SpaceDescriptor& desc) {
  const double norm = lr_norm(x, desc.r());
  if (norm == 0.0) return DualVector::Zero(x.size());
  const double r = desc.r();
  const double p = desc.p();
  if (r == 2.0) {
    if (p == 2.0) return x;
    return std::pow(norm, p - 2.0) * x;
  }
  // ||x||^{p-1} (|x_j| / ||x||)^{r-1} sign(x_j): the ratio stays in [0, 1].
  const double gauge = std::pow(norm, p - 1.0);
  DualVector out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double a = std::abs(x[j]);
    if (a == 0.0) {
      out[j] = 0.0;
      continue;
    }
    const double v = gauge * std::pow(a / norm, r - 1.0);
    out[j] = x[j] < 0.0 ? -v : v;
  }
  return out;
}

PrimalVector inverse_duality_map(const VectorRef& xs, const SpaceDescriptor& desc) {
  return duality_map(xs, desc.dual());
}

double dual_pairing(const VectorRef& xs, const VectorRef& x) {
  require_same_length(xs, x);
  return xs.dot(x);
}

double bregman_distance(const VectorRef& z, const VectorRef& w, const SpaceDescriptor& desc) {
  require_same_length(z, w);
  return bregman_distance(z, duality_map(z, desc), w, desc);
}

double bregman_distance(const VectorRef& z, const VectorRef& dual_z, const VectorRef& w,
                        const SpaceDescriptor& desc) {
  require_same_length(z, w);
  require_same_length(dual_z, w);
  const double p = desc.p();
  if (desc.is_hilbert()) return 0.5 * (w - z).squaredNorm();
  // The closed form cancels only up to rounding; identical points are exact.
  if ((z.array() == w.array()).all()) return 0.0;
  const double zn = lr_norm(z, desc.r());
  const double wn = lr_norm(w, desc.r());
  return std::pow(zn, p) / desc.p_conj() + std::pow(wn, p) / p - dual_z.dot(w);
}

}  // namespace bsgd
