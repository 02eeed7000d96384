#include "fds/cloud.hpp"

namespace fds {

std::size_t GaussianCloud::add(Gaussian2D g) {
  g.order_key = next_key_++;
  gaussians_.push_back(std::move(g));
  invalidate();
  return gaussians_.size() - 1;
}

std::size_t GaussianCloud::add_keep_key(const Gaussian2D& g) {
  gaussians_.push_back(g);
  if (g.order_key >= next_key_) next_key_ = g.order_key + 1;
  invalidate();
  return gaussians_.size() - 1;
}

std::size_t GaussianCloud::remove_if(const std::vector<bool>& mask) {
  if (mask.size() != gaussians_.size()) {
    throw InvalidParameter("GaussianCloud::remove_if: mask size mismatch");
  }
  std::size_t out = 0;
  for (std::size_t i = 0; i < gaussians_.size(); ++i) {
    if (!mask[i]) {
      if (out != i) gaussians_[out] = gaussians_[i];
      ++out;
    }
  }
  const std::size_t removed = gaussians_.size() - out;
  gaussians_.resize(out);
  if (removed > 0) invalidate();
  return removed;
}

std::vector<Vec2> GaussianCloud::positions() const {
  std::vector<Vec2> out;
  out.reserve(gaussians_.size());
  for (const auto& g : gaussians_) out.push_back(g.mu);
  return out;
}

void GaussianCloud::set_density(std::vector<double> r_tilde, std::vector<double> density) {
  if (r_tilde.size() != size() || density.size() != size()) {
    throw InvalidParameter("GaussianCloud::set_density: size mismatch");
  }
  r_tilde_ = std::move(r_tilde);
  density_ = std::move(density);
}

RasterImage warp_image(const RasterImage& canonical, const AffineView& camera, int width,
                       int height) {
  const AffineView inv = inverse(camera);
  RasterImage out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec2 world = inv.linear * Vec2(x, y) + inv.translation;
      out.set_pixel(x, y, canonical.sample(world));
    }
  }
  return out;
}

}  // namespace fds
