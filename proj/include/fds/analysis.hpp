#pragma once

// Density-versus-volume statistics for trained clouds.

#include "fds/cloud.hpp"
#include "fds/ply.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fds {

/// Spearman rank correlation; tied values share their mean rank. Throws
/// InvalidParameter for fewer than two pairs or mismatched lengths. Returns
/// NaN when either side is constant.
[[nodiscard]] double spearman(std::span<const double> x, std::span<const double> y);

/// Least squares in log space: log(volume) = log_coeff + exponent * log(density).
struct PowerLawFit {
  double log_coeff = 0.0;
  double exponent = 0.0;
  /// RMS of the log-space residuals.
  double residual_rms = 0.0;
};

[[nodiscard]] PowerLawFit fit_power_law(std::span<const double> density,
                                        std::span<const double> volume);

struct ScatterPoint {
  std::size_t index = 0;
  double density = 0.0;
  double volume = 0.0;
};

struct DensityVolumeReport {
  std::size_t k_eff = 0;
  std::size_t population = 0;
  std::vector<ScatterPoint> points;
  double spearman = 0.0;
  PowerLawFit fit;
};

inline constexpr std::size_t kAnalysisSampleCap = 25000;

/// Densities come from a KNN over every point; up to `sample_cap` points are
/// then drawn without replacement (seeded) for the statistics.
[[nodiscard]] DensityVolumeReport analyze_density_volume(std::span<const Vec2> positions,
                                                         std::span<const double> volumes,
                                                         std::size_t k, std::size_t sample_cap,
                                                         std::uint64_t seed);
[[nodiscard]] DensityVolumeReport analyze_density_volume(std::span<const Vec3> positions,
                                                         std::span<const double> volumes,
                                                         std::size_t k, std::size_t sample_cap,
                                                         std::uint64_t seed);

/// Ellipse area pi * s1 * s2 of every Gaussian.
[[nodiscard]] std::vector<double> areas_of(const GaussianCloud& cloud);

/// Columns mu_x,mu_y,rot,s_a,s_r_raw_x,s_r_raw_y,alpha_raw,r,g,b,order_key,
/// written with round-trip precision.
void write_cloud_csv(const GaussianCloud& cloud, const std::filesystem::path& path);
[[nodiscard]] GaussianCloud read_cloud_csv(const std::filesystem::path& path);

}  // namespace fds
