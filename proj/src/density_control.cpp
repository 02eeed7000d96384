#include "fds/density_control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fds {

Origin origin_after_removal(const std::vector<bool>& removed) {
  Origin out;
  for (std::size_t i = 0; i < removed.size(); ++i) {
    if (!removed[i]) out.push_back(static_cast<std::ptrdiff_t>(i));
  }
  return out;
}

void GradAccumulator::reset(std::size_t n) {
  sum_.assign(n, 0.0);
  count_.assign(n, 0);
}

void GradAccumulator::add(std::size_t i, double grad_norm) {
  sum_[i] += grad_norm;
  ++count_[i];
}

double GradAccumulator::mean(std::size_t i) const {
  return count_[i] > 0 ? sum_[i] / static_cast<double>(count_[i]) : 0.0;
}

std::vector<double> GradAccumulator::means() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = mean(i);
  return out;
}

void GradAccumulator::apply(const Origin& origin) {
  sum_ = remap(sum_, origin, 0.0);
  count_ = remap(count_, origin, 0L);
}

ThresholdStats dynamic_threshold(std::span<const double> mean_grads, double grad_preset) {
  if (mean_grads.empty()) throw InvalidParameter("dynamic_threshold: empty gradient list");
  ThresholdStats st;
  st.histogram.assign(kThresholdBins, 0);
  double lo = mean_grads[0], total = 0.0;
  for (double g : mean_grads) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw InvalidParameter("dynamic_threshold: gradients must be finite and >= 0");
    }
    lo = std::min(lo, g);
    total += g;
  }
  const auto n = static_cast<double>(mean_grads.size());
  st.grad_min = lo;
  st.grad_mean = total / n;
  const double hi = 3.0 * st.grad_mean;
  if (!(hi > lo)) {
    // Only reachable when every gradient is 0.
    st.histogram[0] = static_cast<long>(mean_grads.size());
    st.grad_25 = lo;
    st.tau_pos = std::max(st.grad_25, grad_preset);
    return st;
  }
  st.bin_width = (hi - lo) / kThresholdBins;
  for (double g : mean_grads) {
    const auto b = static_cast<long>(std::floor((g - lo) / st.bin_width));
    ++st.histogram[static_cast<std::size_t>(std::clamp(b, 0L, long{kThresholdBins - 1}))];
  }
  const double target = 0.25 * n;
  long cumulative = 0;
  int bin = kThresholdBins - 1;
  for (; bin > 0; --bin) {
    cumulative += st.histogram[static_cast<std::size_t>(bin)];
    if (static_cast<double>(cumulative) >= target) break;
  }
  st.grad_25 = lo + bin * st.bin_width;
  st.tau_pos = std::max(st.grad_25, grad_preset);
  return st;
}

DensifyReport densify(GaussianCloud& cloud, const ThresholdStats& stats, GradAccumulator& accum,
                      double scene_extent, std::mt19937_64& rng, const DensifyParams& params) {
  if (accum.size() != cloud.size()) {
    throw InvalidParameter("densify: accumulator size differs from the cloud");
  }
  if (params.split_children < 1 || !(params.split_scale_divisor > 0.0)) {
    throw InvalidParameter("densify: invalid split parameters");
  }
  const std::size_t n = cloud.size();
  const double clone_limit = params.percent_dense * scene_extent;
  std::vector<std::size_t> clones, splits;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(accum.mean(i) > stats.tau_pos)) continue;
    const Gaussian2D& g = cloud[i];
    if (g.s_a * g.s_r().maxCoeff() < clone_limit) {
      clones.push_back(i);
    } else {
      splits.push_back(i);
    }
  }

  DensifyReport rep;
  rep.cloned = clones.size();
  rep.split = splits.size();
  std::vector<Gaussian2D> fresh_keys, kept_keys;
  for (std::size_t i : clones) fresh_keys.push_back(cloud[i]);

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i : splits) {
    const Gaussian2D& parent = cloud[i];
    const Mat2 root = rotation_matrix(parent.rot) * parent.scale().asDiagonal();
    for (int c = 0; c < params.split_children; ++c) {
      const double z0 = normal(rng);
      const double z1 = normal(rng);
      Gaussian2D child = parent;
      child.mu = parent.mu + root * Vec2(z0, z1);
      child.s_a = parent.s_a / params.split_scale_divisor;
      (c == 0 ? kept_keys : fresh_keys).push_back(child);
    }
  }

  std::vector<bool> removed(n, false);
  for (std::size_t i : splits) removed[i] = true;
  rep.origin = origin_after_removal(removed);
  cloud.remove_if(removed);
  for (const auto& g : kept_keys) {
    cloud.add_keep_key(g);
    rep.origin.push_back(-1);
  }
  for (auto& g : fresh_keys) {
    cloud.add(g);
    rep.origin.push_back(-1);
  }
  accum.reset(cloud.size());
  return rep;
}

namespace {

MaintenanceReport remove_where(GaussianCloud& cloud, const std::vector<bool>& flag) {
  MaintenanceReport rep;
  rep.origin = origin_after_removal(flag);
  rep.pruned = cloud.remove_if(flag);
  return rep;
}

}  // namespace

MaintenanceReport opacity_maintenance(GaussianCloud& cloud, long iteration,
                                      const OpacityParams& params) {
  bool reset = false;
  if (params.reset_interval > 0 && iteration > 0 && iteration % params.reset_interval == 0) {
    reset = true;
    const double ceiling_raw = logit(params.reset_ceiling);
    for (auto& g : cloud.gaussians()) {
      if (g.alpha() > params.reset_ceiling) g.alpha_raw = ceiling_raw;
    }
  }
  std::vector<bool> flag(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) flag[i] = cloud[i].alpha() < params.eps_alpha;
  MaintenanceReport rep = remove_where(cloud, flag);
  rep.reset = reset;
  return rep;
}

MaintenanceReport prune_large(GaussianCloud& cloud, double scene_extent, double fraction) {
  std::vector<bool> flag(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    flag[i] = cloud[i].scale().maxCoeff() > fraction * scene_extent;
  }
  return remove_where(cloud, flag);
}

}  // namespace fds
