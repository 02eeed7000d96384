#pragma once

// Weighted k-nearest-neighbour density and the scale constraint s_a = theta * R~.

#include "fds/cloud.hpp"
#include "fds/common.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace fds {

/// Neighbour table for n points, k neighbours each, row-major.
struct KnnResult {
  std::size_t k = 0;
  std::vector<std::size_t> ids;
  std::vector<double> dists;

  [[nodiscard]] std::size_t point_count() const { return k == 0 ? 0 : ids.size() / k; }
  [[nodiscard]] std::span<const std::size_t> ids_of(std::size_t i) const {
    return std::span(ids).subspan(i * k, k);
  }
  [[nodiscard]] std::span<const double> dists_of(std::size_t i) const {
    return std::span(dists).subspan(i * k, k);
  }
};

/// Exact k nearest neighbours of every point (self excluded), ascending by
/// distance with ties broken by lower id. Throws InvalidParameter unless
/// 0 < k < points.size(); callers with small clouds clamp k to n - 1.
[[nodiscard]] KnnResult knn(std::span<const Vec2> points, std::size_t k);
[[nodiscard]] KnnResult knn(std::span<const Vec3> points, std::size_t k);

struct SceneScaleFactor {
  double median_nn = 0.0;
};

/// Median nearest-neighbour distance. If more than half the points have a
/// coincident neighbour the median is 0; the median of the strictly positive
/// distances is used instead. Throws NumericalError if every distance is 0.
[[nodiscard]] SceneScaleFactor scene_scale(const KnnResult& neighbors);

struct DensityEstimate {
  double r_tilde = 0.0;
  double density = 0.0;
  std::vector<std::size_t> neighbor_ids;
  std::vector<double> neighbor_dists;
  std::vector<double> weights;
};

/// R~ below this fraction of median_nn is floored (coincident points).
inline constexpr double kRTildeFloor = 1e-8;

/// w_k = exp(-((d_k - d_1) / median_nn)^2), R~ = sum(w d) / sum(w),
/// D = K / (pi R~^2) for dim 2 and K / (4/3 pi R~^3) for dim 3.
[[nodiscard]] DensityEstimate estimate_density(std::span<const std::size_t> neighbor_ids,
                                               std::span<const double> neighbor_dists,
                                               const SceneScaleFactor& scene, int dim);

/// s_a = theta * R~.
[[nodiscard]] double scale_from_density(const DensityEstimate& est, double theta);

/// Per-point R~ and D for a whole point set.
struct DensityField {
  std::size_t k_eff = 0;
  double median_nn = 0.0;
  std::vector<double> r_tilde;
  std::vector<double> density;
};

/// Uses k_eff = min(k, n - 1), logging a warning when clamped. Throws
/// InvalidParameter for fewer than two points.
[[nodiscard]] DensityField density_field(std::span<const Vec2> points, std::size_t k);
[[nodiscard]] DensityField density_field(std::span<const Vec3> points, std::size_t k);

struct RescaleReport {
  std::size_t k_eff = 0;
  double median_nn = 0.0;
};

/// Sets every s_a to theta * R~ and caches R~ and D on the cloud. Nothing else
/// is touched.
RescaleReport rescale_cloud(GaussianCloud& cloud, std::size_t k, double theta);

}  // namespace fds
