#pragma once

#include "fds/common.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace fds {

/// Row-major RGB raster with real-valued channels on the [0,255] scale.
/// Pixel (x, y) has its center at world coordinate (x, y).
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, const Vec3& fill = Vec3::Zero());

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  [[nodiscard]] bool empty() const { return pixel_count() == 0; }

  [[nodiscard]] double at(int x, int y, int c) const { return data_[index(x, y) + c]; }
  double& at(int x, int y, int c) { return data_[index(x, y) + c]; }

  [[nodiscard]] Vec3 pixel(int x, int y) const {
    const std::size_t i = index(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set_pixel(int x, int y, const Vec3& v) {
    const std::size_t i = index(x, y);
    data_[i] = v.x();
    data_[i + 1] = v.y();
    data_[i + 2] = v.z();
  }

  /// Bilinear read with edge clamping.
  [[nodiscard]] double sample(double x, double y, int c) const;
  [[nodiscard]] Vec3 sample(const Vec2& p) const;

  [[nodiscard]] std::span<const double> data() const { return data_; }
  [[nodiscard]] std::span<double> data() { return data_; }

  bool operator==(const RasterImage&) const = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
           3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// N x 3 color strip.
class StripImage {
 public:
  explicit StripImage(int n);

  [[nodiscard]] int size() const { return static_cast<int>(values_.size()); }
  [[nodiscard]] const Vec3& operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
  Vec3& operator[](int i) { return values_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<Vec3> values_;
};

/// Binary 8-bit P6. Values are rounded and clamped to [0,255] on write.
void write_ppm(const RasterImage& img, const std::filesystem::path& path);
[[nodiscard]] RasterImage read_ppm(const std::filesystem::path& path);

void write_png(const RasterImage& img, const std::filesystem::path& path);
[[nodiscard]] RasterImage read_png(const std::filesystem::path& path);

/// Dispatches on extension (.ppm / .png).
[[nodiscard]] RasterImage read_image(const std::filesystem::path& path);
void write_image(const RasterImage& img, const std::filesystem::path& path);

/// Deterministic test picture: smooth color ramps, a sinusoid grating, a
/// checkerboard and hard-edged disks, so it has flat, smooth and sharp regions.
[[nodiscard]] RasterImage make_test_texture(int width, int height);

/// One row per position, columns r,g,b.
void write_strip_csv(const StripImage& strip, const std::filesystem::path& path);

}  // namespace fds
