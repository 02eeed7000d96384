#pragma once

// Gradient-driven densification (clone/split) with the histogram-based
// dynamic threshold, opacity reset and pruning.
//
// Every structural edit returns an `origin` table: for each Gaussian in the
// edited cloud, the index it had before the edit, or -1 if it is new. Callers
// holding per-Gaussian state (optimizer moments, accumulators) remap with it.

#include "fds/cloud.hpp"

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace fds {

using Origin = std::vector<std::ptrdiff_t>;

/// Applies `origin` to per-Gaussian state, filling new entries with `fresh`.
template <typename T>
std::vector<T> remap(const std::vector<T>& old, const Origin& origin, const T& fresh) {
  std::vector<T> out;
  out.reserve(origin.size());
  for (std::ptrdiff_t o : origin) out.push_back(o < 0 ? fresh : old[static_cast<std::size_t>(o)]);
  return out;
}

/// Origin table for compacting away the entries where `removed` is true.
[[nodiscard]] Origin origin_after_removal(const std::vector<bool>& removed);

/// Running per-Gaussian sums of projected positional gradient norms.
class GradAccumulator {
 public:
  explicit GradAccumulator(std::size_t n = 0) { reset(n); }

  void reset(std::size_t n);
  [[nodiscard]] std::size_t size() const { return sum_.size(); }

  /// Adds one observation for Gaussian i.
  void add(std::size_t i, double grad_norm);

  [[nodiscard]] double sum(std::size_t i) const { return sum_[i]; }
  [[nodiscard]] long count(std::size_t i) const { return count_[i]; }
  /// sum / count, or 0 for a Gaussian never observed.
  [[nodiscard]] double mean(std::size_t i) const;
  [[nodiscard]] std::vector<double> means() const;

  void apply(const Origin& origin);

 private:
  std::vector<double> sum_;
  std::vector<long> count_;
};

inline constexpr int kThresholdBins = 256;

struct ThresholdStats {
  double grad_min = 0.0;
  double grad_mean = 0.0;
  double grad_25 = 0.0;
  double tau_pos = 0.0;
  double bin_width = 0.0;
  std::vector<long> histogram;
};

/// Histogram over [min, 3 mean] (values above clamped into the last bin);
/// grad_25 is the lower edge of the bin where the count accumulated from the
/// top first reaches a quarter of the population; tau_pos = max(grad_25,
/// preset). Throws InvalidParameter for an empty list or negative entries.
[[nodiscard]] ThresholdStats dynamic_threshold(std::span<const double> mean_grads,
                                               double grad_preset);

struct DensifyParams {
  double percent_dense = 0.01;
  double split_scale_divisor = 1.6;
  int split_children = 2;
};

struct DensifyReport {
  std::size_t cloned = 0;
  std::size_t split = 0;
  Origin origin;
};

/// Densifies every Gaussian whose mean accumulated gradient exceeds
/// stats.tau_pos. Small ones (s_a * max(s_r) below percent_dense * extent) are
/// cloned with a fresh order key; large ones are replaced by children drawn
/// from the parent's distribution with s_a divided by the split divisor. The
/// first child keeps the parent's order key, later children get fresh ones.
/// Survivors keep their relative order; new Gaussians are appended. Resets
/// `accum` to the new cloud size.
DensifyReport densify(GaussianCloud& cloud, const ThresholdStats& stats, GradAccumulator& accum,
                      double scene_extent, std::mt19937_64& rng, const DensifyParams& params = {});

struct OpacityParams {
  int reset_interval = 3000;
  double reset_ceiling = 0.01;
  double eps_alpha = 0.005;
};

struct MaintenanceReport {
  bool reset = false;
  std::size_t pruned = 0;
  Origin origin;
};

/// On positive multiples of reset_interval, clamps every activated alpha to
/// at most reset_ceiling. Always prunes Gaussians with alpha < eps_alpha.
MaintenanceReport opacity_maintenance(GaussianCloud& cloud, long iteration,
                                      const OpacityParams& params = {});

/// Baseline large-Gaussian pruning: removes Gaussians whose largest world
/// scale exceeds `fraction * scene_extent`.
MaintenanceReport prune_large(GaussianCloud& cloud, double scene_extent, double fraction = 0.1);

}  // namespace fds
