#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsgd/errors.hpp"
#include "bsgd/noise.hpp"

using namespace bsgd;

namespace {

constexpr Eigen::Index kBig = 200000;

Vector ramp(Eigen::Index n) { return Vector::LinSpaced(n, -1.0, 3.0); }

}  // namespace

TEST_CASE("zero noise leaves the data alone") {
  const Vector y = ramp(50);
  for (const NoiseSpec& spec : {NoiseSpec{GaussianNoise{0.0}, 1}, NoiseSpec{ImpulseNoise{0.0, 0.1, 0.4}, 1},
                                NoiseSpec{SaltPepperNoise{0.0, {}, {}}, 1}}) {
    const CorruptedData c = corrupt(y, spec);
    CHECK(c.data == y);
    CHECK(c.delta == 0.0);
  }
}

TEST_CASE("impulse branch values") {
  CHECK(impulse_value(1.0, ImpulseBranch::low, 0.2) == doctest::Approx(1.0 - 0.2));
  CHECK(impulse_value(1.0, ImpulseBranch::high, 0.2) == doctest::Approx(1.4 * 0.2 + (1.0 - 0.2)));
  CHECK(impulse_value(1.0, ImpulseBranch::high, 0.2) == doctest::Approx(1.08));
  CHECK(impulse_value(-3.0, ImpulseBranch::unchanged, 0.3) == -3.0);
}

TEST_CASE("validation") {
  CHECK_THROWS_AS((NoiseSpec{GaussianNoise{-1.0}}.validate()), ConfigurationError);
  CHECK_THROWS_AS((NoiseSpec{ImpulseNoise{1.5, 0.1, 0.4}}.validate()), ConfigurationError);
  CHECK_THROWS_AS((NoiseSpec{ImpulseNoise{0.1, 0.4, 0.1}}.validate()), ConfigurationError);
  CHECK_THROWS_AS((NoiseSpec{SaltPepperNoise{-0.1, {}, {}}}.validate()), ConfigurationError);
  CHECK_THROWS_AS(corrupt(Vector::Constant(2, NAN), NoiseSpec{GaussianNoise{1.0}}), InvalidInput);
}

TEST_CASE("property: determinism and realized delta") {
  const Vector y = ramp(1000);
  for (const NoiseSpec& spec : {NoiseSpec{GaussianNoise{0.3}, 5}, NoiseSpec{ImpulseNoise{0.2, 0.1, 0.4}, 6},
                                NoiseSpec{SaltPepperNoise{0.1, {}, {}}, 7}}) {
    const CorruptedData a = corrupt(y, spec);
    const CorruptedData b = corrupt(y, spec);
    CHECK(a.data == b.data);
    CHECK(a.delta == b.delta);
    for (double r : {1.1, 2.0, 3.0}) {
      const CorruptedData c = corrupt(y, spec, r);
      double s = 0.0;
      for (Eigen::Index j = 0; j < y.size(); ++j) s += std::pow(std::abs(c.data[j] - y[j]), r);
      CHECK(std::abs(c.delta - std::pow(s, 1.0 / r)) <= 1e-12 * c.delta);
    }
    NoiseSpec other = spec;
    other.seed += 1;
    CHECK(corrupt(y, other).data != a.data);
  }
}

TEST_CASE("property: gaussian variance") {
  const double sigma = 0.37;
  const Vector y = Vector::Zero(kBig);
  const Vector e = corrupt(y, NoiseSpec{GaussianNoise{sigma}, 11}).data;
  const double mean = e.mean();
  const double var = (e.array() - mean).square().sum() / static_cast<double>(kBig - 1);
  CHECK(std::abs(var - sigma * sigma) <= 0.05 * sigma * sigma);
  CHECK(std::abs(mean) < 5 * sigma / std::sqrt(static_cast<double>(kBig)));
}

TEST_CASE("property: impulse fraction and branch split") {
  // With y = 1 the branches separate: low lands in (0.6, 0.9), high in (1.04, 1.16).
  const double pct = 0.05;
  const Vector y = Vector::Ones(kBig);
  const Vector out = corrupt(y, NoiseSpec{ImpulseNoise{pct, 0.1, 0.4}, 12}).data;
  Eigen::Index low = 0, high = 0;
  for (double v : out) {
    if (v == 1.0) continue;
    if (v > 0.6 && v < 0.9) ++low;
    else if (v > 1.04 && v < 1.16) ++high;
    else FAIL("value outside both branch ranges: " << v);
  }
  const double frac = static_cast<double>(low + high) / static_cast<double>(kBig);
  CHECK(std::abs(frac - pct) <= 0.005);
  const double split = static_cast<double>(low) / static_cast<double>(low + high);
  CHECK(std::abs(split - 0.5) <= 0.01);
}

TEST_CASE("salt and pepper") {
  const Vector y = ramp(1000);
  const Vector out = corrupt(y, NoiseSpec{SaltPepperNoise{0.1, {}, {}}, 13}).data;
  Eigen::Index changed = 0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (out[j] != y[j]) {
      ++changed;
      CHECK((out[j] == y.maxCoeff() || out[j] == 0.0));
    }
  }
  // Exactly 100 slots are hit; a few may already hold max(y) or 0.
  CHECK(changed <= 100);
  CHECK(changed >= 95);

  const Vector custom = corrupt(y, NoiseSpec{SaltPepperNoise{1.0, 9.0, -9.0}, 14}).data;
  CHECK((custom.array().abs() == 9.0).all());
}
