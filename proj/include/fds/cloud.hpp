#pragma once

#include "fds/gaussian.hpp"
#include "fds/image.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fds {

/// Mutable collection of 2D Gaussians plus the per-primitive caches that the
/// density link fills in. Structural edits invalidate the caches.
class GaussianCloud {
 public:
  GaussianCloud() = default;

  [[nodiscard]] std::size_t size() const { return gaussians_.size(); }
  [[nodiscard]] bool empty() const { return gaussians_.empty(); }

  [[nodiscard]] const Gaussian2D& operator[](std::size_t i) const { return gaussians_[i]; }
  Gaussian2D& operator[](std::size_t i) { return gaussians_[i]; }

  [[nodiscard]] std::span<const Gaussian2D> gaussians() const { return gaussians_; }
  [[nodiscard]] std::span<Gaussian2D> gaussians() { return gaussians_; }

  /// Appends `g` with a fresh creation-sequence order key. Returns its index.
  std::size_t add(Gaussian2D g);

  /// Appends `g` keeping its current order key.
  std::size_t add_keep_key(const Gaussian2D& g);

  /// Removes every Gaussian whose mask entry is true, preserving order.
  /// Returns the number removed.
  std::size_t remove_if(const std::vector<bool>& mask);

  [[nodiscard]] std::uint64_t next_order_key() const { return next_key_; }

  [[nodiscard]] std::vector<Vec2> positions() const;

  // Density cache, filled by rescale_cloud.
  [[nodiscard]] bool has_density() const { return r_tilde_.size() == size() && !empty(); }
  [[nodiscard]] std::span<const double> r_tilde() const { return r_tilde_; }
  [[nodiscard]] std::span<const double> density() const { return density_; }
  void set_density(std::vector<double> r_tilde, std::vector<double> density);

 private:
  void invalidate() {
    r_tilde_.clear();
    density_.clear();
  }

  std::vector<Gaussian2D> gaussians_;
  std::uint64_t next_key_ = 0;
  std::vector<double> r_tilde_;
  std::vector<double> density_;
};

/// An affine camera together with the ground-truth raster it observes.
struct ViewSpec {
  int id = 0;
  AffineView camera;
  RasterImage gt;
};

/// Resamples a canonical image through `camera`: view pixel x' reads the
/// canonical image at camera^-1(x') (bilinear, edge-clamped).
[[nodiscard]] RasterImage warp_image(const RasterImage& canonical, const AffineView& camera,
                                     int width, int height);

}  // namespace fds
