#pragma once

// Multi-view photometric consistency score of each Gaussian: rank views by
// footprint contribution, sample 49 ellipse-aligned points per view, compare
// the reference view against the others with a weighted SSIM, and delete
// Gaussians scoring below a threshold.

#include "fds/cloud.hpp"
#include "fds/density_control.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace fds {

inline constexpr int kSampleDirections = 8;
inline constexpr int kSampleRadii = 6;
inline constexpr int kSamplePoints = kSampleDirections * kSampleRadii + 1;

struct SamplePattern {
  std::array<Vec2, kSampleDirections> directions;
  std::array<double, kSampleRadii> radii;

  /// Diagonals (+-sqrt2/2, +-sqrt2/2), axes (+-1, 0), (0, +-1); radii 0.5..3.0.
  static const SamplePattern& standard();
};

struct ViewSamples {
  std::array<Vec2, kSamplePoints> points;
  std::array<double, kSamplePoints> weights;
};

/// Points r * (d Sigma') + mu' for every radius and direction (radius-major),
/// followed by mu' itself. Sigma' multiplies the direction directly; no square
/// root is taken. Weights are G'(point).
[[nodiscard]] ViewSamples sample_footprint(const Projected2D& p,
                                           const SamplePattern& pattern = SamplePattern::standard());

/// Sum over the view's footprint pixels of alpha * G'(x').
[[nodiscard]] double view_contribution(const Gaussian2D& g, const ViewSpec& view);

/// Indices of the `m` largest contributions, descending, ties to the lower
/// index. Keeps a bounded heap of size m.
[[nodiscard]] std::vector<std::size_t> top_m_views(std::span<const double> contributions,
                                                   std::size_t m);

/// Weighted SSIM between two sample sets read from their images (bilinear,
/// edge clamped), averaged over channels. Means and variances of each view use
/// that view's weights; the cross term is normalized by the reference weights
/// and pairs points by position.
[[nodiscard]] double weighted_ssim(const ViewSamples& s1, const ViewSamples& si,
                                   const RasterImage& img1, const RasterImage& img_i);

struct ConfidenceScore {
  double value = 0.0;
  /// Ids (ViewSpec::id) of the contributing views, reference first.
  std::vector<int> views;
};

/// Mean weighted SSIM of the reference (largest-contribution) view against
/// the next m - 1. Empty when fewer than two views see the Gaussian. Throws
/// InvalidParameter for m < 2; m above the view count is clamped.
[[nodiscard]] std::optional<ConfidenceScore> confidence(const Gaussian2D& g,
                                                        std::span<const ViewSpec> views,
                                                        std::size_t m);

struct FilterReport {
  std::size_t removed = 0;
  std::size_t unscorable = 0;
  /// Pre-filter scores, indexed like the cloud before deletion.
  std::vector<std::optional<ConfidenceScore>> scores;
  Origin origin;
};

/// Removes every scorable Gaussian with confidence < tau_c.
FilterReport apply_filter(GaussianCloud& cloud, std::span<const ViewSpec> views, std::size_t m,
                          double tau_c);

/// CSV with columns id,score,reference_view; unscorable rows have empty fields.
void write_confidence_csv(const std::vector<std::optional<ConfidenceScore>>& scores,
                          const std::filesystem::path& path);

}  // namespace fds
