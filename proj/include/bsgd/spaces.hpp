#pragma once

#include <Eigen/Core>

namespace bsgd {

using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

// Coefficients of a signal living in the primal space l^r.
using PrimalVector = Vector;
// Coefficients of a functional living in the dual space l^{r*}.
using DualVector = Vector;

/// Conjugate exponent t / (t - 1).
double conjugate_exponent(double t);

/// Geometry of a finite-dimensional l^r space together with the power p of
/// its duality map J_p = grad (1/p)||.||_r^p.
///
/// Both exponents must lie strictly between 1 and infinity; l^1 and l^inf are
/// neither smooth nor strictly convex, so their duality maps are set-valued
/// and are not supported.
class SpaceDescriptor {
 public:
  /// Throws ConfigurationError unless 1 < r < inf and 1 < p < inf.
  SpaceDescriptor(double r, double p);

  static SpaceDescriptor hilbert() { return {2.0, 2.0}; }

  double r() const noexcept { return r_; }
  double p() const noexcept { return p_; }
  double r_conj() const noexcept { return conjugate_exponent(r_); }
  double p_conj() const noexcept { return conjugate_exponent(p_); }

  /// Descriptor (r*, p*) of the dual space, whose duality map inverts ours.
  SpaceDescriptor dual() const { return {r_conj(), p_conj()}; }

  bool is_hilbert() const noexcept { return r_ == 2.0 && p_ == 2.0; }

  friend bool operator==(const SpaceDescriptor&, const SpaceDescriptor&) = default;

 private:
  double r_;
  double p_;
};

/// (sum |x_j|^r)^(1/r). Throws InvalidInput on non-finite entries or r <= 1.
double lr_norm(const VectorRef& x, double r);

/// ||x||_r^{p-r} |x|^{r-1} sign(x), with J_p(0) = 0.
DualVector duality_map(const VectorRef& x, const SpaceDescriptor& desc);

/// Inverse of duality_map: the duality map of the dual descriptor (r*, p*).
PrimalVector inverse_duality_map(const VectorRef& xs, const SpaceDescriptor& desc);

/// <xs, x> = sum xs_j x_j. Throws DimensionError on length mismatch.
double dual_pairing(const VectorRef& xs, const VectorRef& x);

/// D(z, w) = (1/p*)||z||^p + (1/p)||w||^p - <J_p(z), w>.
double bregman_distance(const VectorRef& z, const VectorRef& w, const SpaceDescriptor& desc);

/// Bregman distance when J_p(z) is already known (saves one duality map).
double bregman_distance(const VectorRef& z, const VectorRef& dual_z, const VectorRef& w,
                        const SpaceDescriptor& desc);

}  // namespace bsgd
