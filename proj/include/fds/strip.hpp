#pragma once

// 1D color-strip experiment: additive superposition of fixed Gaussians whose
// colors are fitted to a piecewise-constant stripe pattern under an L1 loss.

#include "fds/gaussian.hpp"
#include "fds/image.hpp"

#include <span>
#include <vector>

namespace fds {

enum class StripChannelMode { Sum, Mean };

/// value(i) = sum_m c_m * exp(-(i - mean_m)^2 / (2 std_m^2)) for i in [0, n).
[[nodiscard]] StripImage render_strip(std::span<const Gaussian1D> gaussians, int n);

/// (1/N) sum_i |gt(i) - rendered(i)|, channel differences summed (or averaged) per position.
[[nodiscard]] double strip_loss(const StripImage& rendered, const StripImage& gt,
                                StripChannelMode mode = StripChannelMode::Sum);

/// `k_colors` equal-width stripes of maximally separated hues (full saturation
/// and value), quantized to integers in [0,255].
[[nodiscard]] StripImage make_stripe_target(int k_colors, int n);

/// M Gaussians with means (m + 1/2) * n / M and a shared stddev.
[[nodiscard]] std::vector<Gaussian1D> uniform_strip_gaussians(int m, double stddev, int n);

struct StripFitOptions {
  int max_iters = 5000;
  double lr = 0.08;
  /// lr_t = lr / (1 + t / decay_steps)
  double decay_steps = 1000.0;
  /// Converged when the loss moves less than this over `window` iterations.
  double tolerance = 1e-4;
  int window = 200;
  StripChannelMode mode = StripChannelMode::Sum;
};

struct StripFitResult {
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<Gaussian1D> gaussians;
};

/// Optimizes colors only (means and stddevs stay fixed), starting from black.
[[nodiscard]] StripFitResult fit_strip_colors(std::vector<Gaussian1D> gaussians,
                                              const StripImage& gt,
                                              const StripFitOptions& opts = {});

struct StripSweepOptions {
  int m_min = 1, m_max = 40;
  int s_min = 1, s_max = 20;
  int k_colors = 5;
  int n = 100;
  StripFitOptions fit;
};

struct StripSweepCell {
  int m = 0;
  int s = 0;
  StripFitResult result;
};

/// Row-major over M then S. Cells are independent and run in parallel.
[[nodiscard]] std::vector<StripSweepCell> run_strip_sweep(const StripSweepOptions& opts);

}  // namespace fds
