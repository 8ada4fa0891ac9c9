#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include "bsgd/spaces.hpp"

namespace bsgd {

/// I.i.d. N(0, sigma^2) added to every entry.
struct GaussianNoise {
  double sigma = 0.0;
};

/// Random-valued impulse noise: each entry is kept with probability 1 - pct,
/// otherwise replaced by (1 - xi) y or 1.4 xi + (1 - xi) y with equal
/// probability, xi ~ Uniform(lo, hi) drawn per corrupted entry.
struct ImpulseNoise {
  double pct = 0.05;
  double lo = 0.1;
  double hi = 0.4;
};

/// A fraction pct of the entries, chosen without replacement, is set to the
/// salt or pepper value with equal probability. Unset values default to
/// max(y) and 0.
struct SaltPepperNoise {
  double pct = 0.05;
  std::optional<double> salt;
  std::optional<double> pepper;
};

struct NoiseSpec {
  std::variant<GaussianNoise, ImpulseNoise, SaltPepperNoise> model;
  std::uint64_t seed = 0;

  /// Throws ConfigurationError on pct outside [0, 1], sigma < 0, lo >= hi.
  void validate() const;
};

struct CorruptedData {
  Vector data;
  /// ||data - y|| in l^{norm_exponent}, measured on the realized perturbation.
  double delta = 0.0;
};

/// Deterministic in (y, spec).
CorruptedData corrupt(const VectorRef& y, const NoiseSpec& spec, double norm_exponent = 2.0);

enum class ImpulseBranch { unchanged, low, high };

/// Value of one impulse-corrupted entry for a given branch and draw xi.
double impulse_value(double y, ImpulseBranch branch, double xi);

}  // namespace bsgd
