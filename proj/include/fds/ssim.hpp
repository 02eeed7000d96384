#pragma once

// Windowed SSIM (11x11 Gaussian window, sigma 1.5, zero padding) and PSNR on
// the [0,255] scale.

#include "fds/image.hpp"

#include <limits>

namespace fds {

inline constexpr double kSsimC1 = 6.5025;   // (0.01 * 255)^2
inline constexpr double kSsimC2 = 58.5225;  // (0.03 * 255)^2

/// Mean SSIM over pixels and channels.
[[nodiscard]] double ssim(const RasterImage& a, const RasterImage& b);

/// Mean SSIM and, when `grad` is non-null, d(mean SSIM)/d(variable).
[[nodiscard]] double ssim_with_grad(const RasterImage& variable, const RasterImage& reference,
                                    RasterImage* grad);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / MSE); +inf for identical images.
[[nodiscard]] double psnr(const RasterImage& a, const RasterImage& b);

}  // namespace fds
