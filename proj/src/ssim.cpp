#include "fds/ssim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace fds {

namespace {

constexpr int kRadius = 5;
constexpr int kWindow = 2 * kRadius + 1;

const std::array<double, kWindow>& window() {
  static const std::array<double, kWindow> w = [] {
    std::array<double, kWindow> out{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kRadius;
      out[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
  }();
  return w;
}

// Separable zero-padded Gaussian blur, one output row at a time: the
// vertical taps go into a padded row buffer, then the horizontal taps. The
// kernel is symmetric, so mirrored taps share a multiply and the operator is
// its own adjoint. Cloned per ISA; with contraction off every clone rounds
// identically.
__attribute__((target_clones("avx512f", "avx2", "default"))) void blur(const double* in, double* out, int w, int h) {
  const auto& k = window();
  thread_local std::vector<double> row;
  row.assign(static_cast<std::size_t>(w) + 2 * kRadius, 0.0);
  double* mid = row.data() + kRadius;
  for (int y = 0; y < h; ++y) {
    const double* center = in + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) mid[x] = k[kRadius] * center[x];
    for (int j = 1; j <= kRadius; ++j) {
      const double kj = k[kRadius - j];
      const bool has_up = y - j >= 0, has_down = y + j < h;
      const double* up = in + static_cast<std::size_t>(y - j) * w;
      const double* down = in + static_cast<std::size_t>(y + j) * w;
      if (has_up && has_down) {
        for (int x = 0; x < w; ++x) mid[x] += kj * (up[x] + down[x]);
      } else if (has_up) {
        for (int x = 0; x < w; ++x) mid[x] += kj * up[x];
      } else if (has_down) {
        for (int x = 0; x < w; ++x) mid[x] += kj * down[x];
      }
    }
    double* dst = out + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) dst[x] = k[kRadius] * mid[x];
    for (int j = 1; j <= kRadius; ++j) {
      const double kj = k[kRadius - j];
      const double* left = mid - j;
      const double* right = mid + j;
      for (int x = 0; x < w; ++x) dst[x] += kj * (left[x] + right[x]);
    }
  }
}

void check_dims(const RasterImage& a, const RasterImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidParameter("ssim/psnr: image dimensions differ");
  }
  if (a.empty()) throw InvalidParameter("ssim/psnr: empty image");
}

}  // namespace

double ssim_with_grad(const RasterImage& variable, const RasterImage& reference,
                      RasterImage* grad) {
  check_dims(variable, reference);
  const int w = variable.width(), h = variable.height();
  const std::size_t n = variable.pixel_count();
  if (grad != nullptr) *grad = RasterImage(w, h);

  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  std::vector<double> mx(n), my(n), exx(n), eyy(n), exy(n);
  std::vector<double> d_my, d_eyy, d_exy;
  if (grad != nullptr) {
    d_my.resize(n);
    d_eyy.resize(n);
    d_exy.resize(n);
  }
  const double norm = 1.0 / (3.0 * static_cast<double>(n));
  double total = 0.0;

  for (int c = 0; c < 3; ++c) {
    const auto vd = variable.data();
    const auto rd = reference.data();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rd[3 * i + c];
      y[i] = vd[3 * i + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    blur(x.data(), mx.data(), w, h);
    blur(y.data(), my.data(), w, h);
    blur(xx.data(), exx.data(), w, h);
    blur(yy.data(), eyy.data(), w, h);
    blur(xy.data(), exy.data(), w, h);

    for (std::size_t i = 0; i < n; ++i) {
      const double m1 = mx[i], m2 = my[i];
      const double s11 = exx[i] - m1 * m1;
      const double s22 = eyy[i] - m2 * m2;
      const double s12 = exy[i] - m1 * m2;
      const double a1 = 2.0 * m1 * m2 + kSsimC1;
      const double a2 = 2.0 * s12 + kSsimC2;
      const double b1 = m1 * m1 + m2 * m2 + kSsimC1;
      const double b2 = s11 + s22 + kSsimC2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (grad != nullptr) {
        const double inv = 1.0 / (b1 * b2);
        d_my[i] = norm * ((2.0 * m1 * a2 - 2.0 * m1 * a1) * inv - s * 2.0 * m2 / b1 +
                          s * 2.0 * m2 / b2);
        d_eyy[i] = norm * (-s / b2);
        d_exy[i] = norm * (2.0 * a1 * inv);
      }
    }

    if (grad != nullptr) {
      // Reuse the first-moment buffers for the adjoint blurs.
      blur(d_my.data(), mx.data(), w, h);
      blur(d_eyy.data(), exx.data(), w, h);
      blur(d_exy.data(), exy.data(), w, h);
      auto gd = grad->data();
      for (std::size_t i = 0; i < n; ++i) {
        gd[3 * i + c] = mx[i] + 2.0 * y[i] * exx[i] + x[i] * exy[i];
      }
    }
  }
  return total * norm;
}

double ssim(const RasterImage& a, const RasterImage& b) { return ssim_with_grad(a, b, nullptr); }

double psnr(const RasterImage& a, const RasterImage& b) {
  check_dims(a, b);
  const auto ad = a.data();
  const auto bd = b.data();
  double mse = 0.0;
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double d = ad[i] - bd[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ad.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace fds
