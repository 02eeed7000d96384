#pragma once

// Front-to-back alpha compositing of projected 2D Gaussians and the analytic
// backward pass.
//
// Two implementations share one contract:
//   * fds::render_raster / fds::backward_pixels: tile-binned, OpenMP-parallel
//     over 16-pixel row bands. Per-Gaussian sums are accumulated band-locally
//     and reduced in band order, so results do not depend on thread count.
//   * fds::reference::*: single-threaded per-pixel loops over every Gaussian,
//     kept as the test oracle for the parallel kernels.

#include "fds/cloud.hpp"
#include "fds/gaussian.hpp"
#include "fds/image.hpp"

#include <vector>

namespace fds {

/// Inclusive pixel box. Empty when x0 > x1 or y0 > y1.
struct Footprint {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  [[nodiscard]] bool empty() const { return x0 > x1 || y0 > y1; }
  [[nodiscard]] bool contains(int x, int y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
  [[nodiscard]] long area() const {
    return empty() ? 0L : static_cast<long>(x1 - x0 + 1) * static_cast<long>(y1 - y0 + 1);
  }
};

inline constexpr double kFootprintSigmas = 3.0;

/// Axis-aligned box of the 3-sigma ellipse, rounded outward and clipped to
/// [0,width) x [0,height).
[[nodiscard]] Footprint footprint(const Projected2D& p, int width, int height);

struct RenderOptions {
  Vec3 background = Vec3::Zero();
};

struct RenderOutput {
  RasterImage image;
  /// Sum over pixels of alpha * G'(x') * T, per Gaussian (storage order).
  std::vector<double> blend_weight;
};

[[nodiscard]] RenderOutput render_raster(const GaussianCloud& cloud, const AffineView& camera,
                                         int width, int height, const RenderOptions& opts = {});

[[nodiscard]] RenderOutput render_raster(const GaussianCloud& cloud, const ViewSpec& view,
                                         const RenderOptions& opts = {});

/// Gradient of a scalar loss with respect to one Gaussian's stored parameters.
struct GaussianGrad {
  Vec2 mu = Vec2::Zero();
  double rot = 0.0;
  double s_a = 0.0;
  Vec2 s_r_raw = Vec2::Zero();
  double alpha_raw = 0.0;
  Vec3 color = Vec3::Zero();
  /// Gradient with respect to the projected (pixel-space) center.
  Vec2 mu_p = Vec2::Zero();
};

/// Back-propagates a per-pixel image gradient dL/dC (same layout as the
/// rendered image) to every Gaussian.
[[nodiscard]] std::vector<GaussianGrad> backward_pixels(const GaussianCloud& cloud,
                                                        const AffineView& camera,
                                                        const RasterImage& pixel_grad,
                                                        const RenderOptions& opts = {});

struct LossConfig {
  /// L = (1 - lambda) * L1 + lambda * (1 - SSIM)
  double ssim_lambda = 0.2;
};

struct LossValue {
  double loss = 0.0;
  double l1 = 0.0;    // mean |r - g| / 255 over pixels and channels
  double ssim = 1.0;  // mean windowed SSIM
};

/// Loss and dL/dC. Throws InvalidParameter on dimension mismatch.
[[nodiscard]] LossValue image_loss(const RasterImage& rendered, const RasterImage& gt,
                                   const LossConfig& cfg, RasterImage* grad = nullptr);

struct BackwardResult {
  LossValue loss;
  RenderOutput forward;
  std::vector<GaussianGrad> grads;
  /// |dL/d mu_p| per Gaussian.
  std::vector<double> mu_p_grad_norm;
};

/// Forward render, loss against view.gt, and full backward pass.
[[nodiscard]] BackwardResult backward(const GaussianCloud& cloud, const ViewSpec& view,
                                      const LossConfig& cfg, const RenderOptions& opts = {});

/// Maps projected-space accumulators (dL/dmu_p, dL/dconic, dL/dalpha,
/// dL/dcolor) onto the stored parameters of `g`.
[[nodiscard]] GaussianGrad chain_to_parameters(const Gaussian2D& g, const AffineView& camera,
                                               const Vec2& d_mu_p, const Mat2& d_conic,
                                               double d_alpha, const Vec3& d_color);

namespace reference {

/// Serial per-pixel compositing. With `use_footprint == false` every Gaussian
/// is evaluated at every pixel (no truncation).
[[nodiscard]] RenderOutput render_raster(const GaussianCloud& cloud, const AffineView& camera,
                                         int width, int height, const RenderOptions& opts = {},
                                         bool use_footprint = true);

[[nodiscard]] std::vector<GaussianGrad> backward_pixels(const GaussianCloud& cloud,
                                                        const AffineView& camera,
                                                        const RasterImage& pixel_grad,
                                                        const RenderOptions& opts = {});

}  // namespace reference

}  // namespace fds
