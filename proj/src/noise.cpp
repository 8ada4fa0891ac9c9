#include "bsgd/noise.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "bsgd/errors.hpp"
#include "bsgd/rng.hpp"

namespace bsgd {

namespace {

void require_fraction(double pct) {
  if (!(pct >= 0.0 && pct <= 1.0)) throw ConfigurationError("noise fraction must lie in [0, 1]");
}

struct Validator {
  void operator()(const GaussianNoise& g) const {
    if (!(g.sigma >= 0.0) || !std::isfinite(g.sigma)) {
      throw ConfigurationError("gaussian sigma must be >= 0");
    }
  }
  void operator()(const ImpulseNoise& n) const {
    require_fraction(n.pct);
    if (!(n.lo < n.hi)) throw ConfigurationError("impulse noise requires lo < hi");
  }
  void operator()(const SaltPepperNoise& n) const { require_fraction(n.pct); }
};

struct Corruptor {
  const VectorRef& y;
  Rng& rng;

  Vector operator()(const GaussianNoise& g) const {
    Vector out = y;
    if (g.sigma == 0.0) return out;
    for (Eigen::Index j = 0; j < out.size(); ++j) out[j] += g.sigma * rng.normal();
    return out;
  }

  Vector operator()(const ImpulseNoise& n) const {
    Vector out = y;
    if (n.pct == 0.0) return out;
    for (Eigen::Index j = 0; j < out.size(); ++j) {
      const double u = rng.uniform();
      if (u >= n.pct) continue;
      const auto branch = u < 0.5 * n.pct ? ImpulseBranch::low : ImpulseBranch::high;
      out[j] = impulse_value(y[j], branch, rng.uniform(n.lo, n.hi));
    }
    return out;
  }

  Vector operator()(const SaltPepperNoise& n) const {
    Vector out = y;
    const auto m = static_cast<std::size_t>(y.size());
    const auto count = static_cast<std::size_t>(std::llround(n.pct * static_cast<double>(m)));
    if (count == 0) return out;
    const double salt = n.salt.value_or(y.maxCoeff());
    const double pepper = n.pepper.value_or(0.0);
    // Partial Fisher-Yates: the first `count` slots are a uniform sample.
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < count; ++k) {
      std::swap(idx[k], idx[k + rng.index(m - k)]);
      out[static_cast<Eigen::Index>(idx[k])] = rng.uniform() < 0.5 ? salt : pepper;
    }
    return out;
  }
};

}  // namespace

void NoiseSpec::validate() const { std::visit(Validator{}, model); }

double impulse_value(double y, ImpulseBranch branch, double xi) {
  switch (branch) {
    case ImpulseBranch::low:
      return (1.0 - xi) * y;
    case ImpulseBranch::high:
      return 1.4 * xi + (1.0 - xi) * y;
    case ImpulseBranch::unchanged:
      break;
  }
  return y;
}

CorruptedData corrupt(const VectorRef& y, const NoiseSpec& spec, double norm_exponent) {
  spec.validate();
  if (!y.allFinite()) throw InvalidInput("clean data has non-finite entries");
  Rng rng(spec.seed);
  CorruptedData out;
  out.data = std::visit(Corruptor{y, rng}, spec.model);
  out.delta = lr_norm(out.data - y, norm_exponent);
  return out;
}

}  // namespace bsgd
