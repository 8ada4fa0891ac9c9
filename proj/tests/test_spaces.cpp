#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsgd/errors.hpp"
#include "bsgd/rng.hpp"
#include "bsgd/spaces.hpp"

using namespace bsgd;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Plain summation, no shared code with lr_norm.
double norm_oracle(const Vector& x, double r) {
  double s = 0.0;
  for (double v : x) s += std::pow(std::abs(v), r);
  return std::pow(s, 1.0 / r);
}

double gauge(const Vector& x, const SpaceDescriptor& d) { return std::pow(norm_oracle(x, d.r()), d.p()) / d.p(); }

Vector fd_gradient(const Vector& x, const SpaceDescriptor& d, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector a = x, b = x;
    a[j] += h;
    b[j] -= h;
    g[j] = (gauge(a, d) - gauge(b, d)) / (2 * h);
  }
  return g;
}

Vector random_vec(Rng& rng, Eigen::Index n, double floor = 0.0) {
  Vector x(n);
  for (auto& v : x) {
    v = rng.normal();
    if (std::abs(v) < floor) v = v < 0 ? -floor - rng.uniform() : floor + rng.uniform();
  }
  return x;
}

}  // namespace

TEST_CASE("norm examples") {
  CHECK(lr_norm(vec({3, 4}), 2.0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(lr_norm(vec({1, -2}), 3.0) == doctest::Approx(norm_oracle(vec({1, -2}), 3.0)).epsilon(1e-14));
  CHECK(lr_norm(vec({1, -2}), 3.0) == doctest::Approx(2.0800838).epsilon(1e-7));
  CHECK(lr_norm(Vector::Zero(3), 1.5) == 0.0);
  CHECK_THROWS_AS(lr_norm(vec({1, NAN}), 2.0), InvalidInput);
}

TEST_CASE("descriptor validation") {
  CHECK_THROWS_AS(SpaceDescriptor(1.0, 2.0), ConfigurationError);
  CHECK_THROWS_AS(SpaceDescriptor(2.0, 1.0), ConfigurationError);
  CHECK_THROWS_AS(SpaceDescriptor(INFINITY, 2.0), ConfigurationError);
  const SpaceDescriptor d(3.0, 2.0);
  CHECK(d.dual().r() == doctest::Approx(1.5));
  CHECK(d.dual().p() == doctest::Approx(2.0));
  CHECK(SpaceDescriptor::hilbert().is_hilbert());
}

TEST_CASE("duality map examples") {
  CHECK(duality_map(vec({3, 4}), SpaceDescriptor::hilbert()) == vec({3, 4}));
  const SpaceDescriptor d(3.0, 2.0);
  const Vector x = vec({1, -2});
  const Vector fd = fd_gradient(x, d);
  const Vector j = duality_map(x, d);
  CHECK(j[0] == doctest::Approx(fd[0]).epsilon(1e-7));
  CHECK(j[1] == doctest::Approx(fd[1]).epsilon(1e-7));
  CHECK(j[0] == doctest::Approx(0.480750).epsilon(1e-5));
  CHECK(j[1] == doctest::Approx(-1.922999).epsilon(1e-5));
  CHECK(duality_map(Vector::Zero(4), SpaceDescriptor(1.1, 3.0)).isZero(0.0));
}

TEST_CASE("inverse duality map examples") {
  CHECK(inverse_duality_map(vec({3, 4}), SpaceDescriptor::hilbert()) == vec({3, 4}));
  const SpaceDescriptor d(3.0, 2.0);
  const Vector back = inverse_duality_map(duality_map(vec({1, -2}), d), d);
  CHECK(back[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(back[1] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(inverse_duality_map(Vector::Zero(2), d).isZero(0.0));
}

TEST_CASE("pairing examples") {
  CHECK(dual_pairing(vec({1, 0}), vec({0, 1})) == 0.0);
  CHECK(dual_pairing(vec({2, 3}), vec({1, 1})) == 5.0);
  const SpaceDescriptor d(3.0, 2.0);
  const Vector x = vec({1, -2});
  CHECK(dual_pairing(duality_map(x, d), x) == doctest::Approx(std::pow(norm_oracle(x, 3.0), 2)).epsilon(1e-13));
  CHECK(dual_pairing(duality_map(x, d), x) == doctest::Approx(4.326749).epsilon(1e-6));
  CHECK_THROWS_AS(dual_pairing(vec({1}), vec({1, 2})), DimensionError);
}

TEST_CASE("bregman examples") {
  CHECK(bregman_distance(vec({1, 0}), vec({0, 1}), SpaceDescriptor::hilbert()) == doctest::Approx(1.0));
  const Vector z = vec({0.3, -0.7});
  CHECK(std::abs(bregman_distance(z, z, SpaceDescriptor(1.5, 2.0))) < 1e-15);
  // p = r = 3: (1/p*) ||z||^p + (1/p) ||w||^p - <J z, w> = 2/3 + 1/3 - 0, so 1 and not 2/3.
  CHECK(bregman_distance(vec({1, 0}), vec({0, 1}), SpaceDescriptor(3.0, 3.0)) == doctest::Approx(1.0));
}

TEST_CASE("property: geometry identities on the parameter grid") {
  Rng rng(42);
  int cases = 0;
  for (double r : {1.1, 1.5, 2.0, 3.0, 4.0}) {
    for (double p : {2.0, r}) {
      const SpaceDescriptor d(r, p);
      for (int t = 0; t < 30; ++t) {
        const auto n = static_cast<Eigen::Index>(1 + rng.index(64));
        const Vector x = random_vec(rng, n);
        const Vector j = duality_map(x, d);
        const double nx = norm_oracle(x, r);
        CHECK(dual_pairing(j, x) == doctest::Approx(std::pow(nx, p)).epsilon(1e-12));
        CHECK(norm_oracle(j, d.r_conj()) == doctest::Approx(std::pow(nx, p - 1)).epsilon(1e-12));
        const Vector back = inverse_duality_map(j, d);
        CHECK((back - x).norm() <= 1e-10 * x.norm());

        const Vector w = random_vec(rng, n);
        const Vector v = random_vec(rng, n);
        const double dzw = bregman_distance(x, w, d);
        CHECK(dzw >= -1e-12);
        const double three = bregman_distance(x, v, d) + bregman_distance(v, w, d) +
                             dual_pairing(duality_map(v, d) - j, w - v);
        CHECK(std::abs(dzw - three) <= 1e-10 * std::max(1.0, std::abs(dzw)));
        ++cases;
      }
    }
  }
  CHECK(cases == 300);
}

TEST_CASE("property: duality map is the gradient of the gauge") {
  Rng rng(7);
  for (double r : {1.1, 1.5, 2.0, 3.0, 4.0}) {
    for (double p : {2.0, r}) {
      const SpaceDescriptor d(r, p);
      for (int t = 0; t < 10; ++t) {
        const Vector x = random_vec(rng, static_cast<Eigen::Index>(1 + rng.index(8)), 1e-2);
        const Vector fd = fd_gradient(x, d);
        CHECK((duality_map(x, d) - fd).norm() <= 1e-5 * fd.norm());
      }
    }
  }
}

TEST_CASE("property: bregman definiteness and hilbert equality") {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const Vector z = random_vec(rng, 5);
    const Vector w = random_vec(rng, 5);
    CHECK(bregman_distance(z, w, SpaceDescriptor::hilbert()) ==
          doctest::Approx(0.5 * (w - z).squaredNorm()).epsilon(1e-12));
    const SpaceDescriptor d(1.5, 1.5);
    if (bregman_distance(z, w, d) < 1e-12) CHECK((z - w).norm() < 1e-6);
    CHECK(bregman_distance(z, z, d) < 1e-12);
  }
}
