#pragma once

// Primitive definitions for the 1D strip and 2D splatting experiments.

#include "fds/common.hpp"

#include <cstdint>

namespace fds {

/// Affine "camera": pixel = linear * world + translation.
struct AffineView {
  Mat2 linear = Mat2::Identity();
  Vec2 translation = Vec2::Zero();
};

/// One anisotropic 2D Gaussian.
///
/// The effective per-axis standard deviation is `s_a * sigmoid(s_r_raw)`.
/// Relative scale and opacity are stored pre-activation so that optimizer
/// steps can never leave (0,1).
struct Gaussian2D {
  Vec2 mu = Vec2::Zero();
  double rot = 0.0;
  double s_a = 1.0;
  Vec2 s_r_raw = Vec2::Zero();
  double alpha_raw = 0.0;
  Vec3 color = Vec3::Zero();  // [0,255]
  std::uint64_t order_key = 0;

  [[nodiscard]] Vec2 s_r() const { return {sigmoid(s_r_raw.x()), sigmoid(s_r_raw.y())}; }
  [[nodiscard]] double alpha() const { return sigmoid(alpha_raw); }
  [[nodiscard]] Vec2 scale() const { return s_a * s_r(); }
};

/// Fixed-placement strip Gaussian: only the color is learnable.
class Gaussian1D {
 public:
  Gaussian1D(double mean, double stddev, Vec3 color = Vec3::Zero());

  [[nodiscard]] double mean() const { return mean_; }
  [[nodiscard]] double stddev() const { return stddev_; }
  [[nodiscard]] double value_at(double x) const;

  Vec3 color;

 private:
  double mean_;
  double stddev_;
};

/// A Gaussian mapped into pixel space by an AffineView.
struct Projected2D {
  Vec2 mu_p = Vec2::Zero();
  Mat2 sigma_p = Mat2::Identity();
};

[[nodiscard]] Mat2 rotation_matrix(double rot);

/// R diag(s) diag(s)^T R^T. Throws InvalidParameter for non-positive s.
[[nodiscard]] Mat2 build_covariance(double rot, const Vec2& s);

[[nodiscard]] Mat2 covariance_of(const Gaussian2D& g);

/// exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)) for an arbitrary 2D mean/covariance.
/// Throws NumericalError when the covariance is singular.
[[nodiscard]] double eval_gaussian(const Vec2& mu, const Mat2& sigma, const Vec2& x);

[[nodiscard]] double eval_gaussian(const Gaussian2D& g, const Vec2& x);

[[nodiscard]] double eval_gaussian(const Projected2D& p, const Vec2& x);

/// Throws InvalidParameter when the view's linear part is singular.
[[nodiscard]] Projected2D project(const Gaussian2D& g, const AffineView& view);

[[nodiscard]] Projected2D project(const Projected2D& p, const AffineView& view);

/// view_a after view_b, i.e. x -> a(b(x)).
[[nodiscard]] AffineView compose(const AffineView& a, const AffineView& b);

[[nodiscard]] AffineView inverse(const AffineView& v);

}  // namespace fds
