#include "fds/strip.hpp"

#include "fds/parallel.hpp"

#include <cmath>

namespace fds {

StripImage render_strip(std::span<const Gaussian1D> gaussians, int n) {
  StripImage out(n);
  for (int i = 0; i < n; ++i) {
    Vec3 acc = Vec3::Zero();
    for (const auto& g : gaussians) {
      acc += g.color * g.value_at(static_cast<double>(i));
    }
    out[i] = acc;
  }
  return out;
}

double strip_loss(const StripImage& rendered, const StripImage& gt, StripChannelMode mode) {
  if (rendered.size() != gt.size()) {
    throw InvalidParameter("strip_loss: strip lengths differ");
  }
  double total = 0.0;
  for (int i = 0; i < gt.size(); ++i) {
    total += (gt[i] - rendered[i]).cwiseAbs().sum();
  }
  if (mode == StripChannelMode::Mean) total /= 3.0;
  return total / static_cast<double>(gt.size());
}

namespace {

Vec3 hue_to_rgb(double h) {
  const double h6 = h * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  switch (sector) {
    case 0: return {1.0, f, 0.0};
    case 1: return {1.0 - f, 1.0, 0.0};
    case 2: return {0.0, 1.0, f};
    case 3: return {0.0, 1.0 - f, 1.0};
    case 4: return {f, 0.0, 1.0};
    default: return {1.0, 0.0, 1.0 - f};
  }
}

}  // namespace

StripImage make_stripe_target(int k_colors, int n) {
  if (k_colors < 1) throw InvalidParameter("make_stripe_target: k_colors must be >= 1");
  StripImage gt(n);
  std::vector<Vec3> palette;
  for (int k = 0; k < k_colors; ++k) {
    Vec3 c = hue_to_rgb(static_cast<double>(k) / k_colors) * 255.0;
    palette.emplace_back(std::round(c.x()), std::round(c.y()), std::round(c.z()));
  }
  for (int i = 0; i < n; ++i) {
    gt[i] = palette[static_cast<std::size_t>(std::min(i * k_colors / n, k_colors - 1))];
  }
  return gt;
}

std::vector<Gaussian1D> uniform_strip_gaussians(int m, double stddev, int n) {
  if (m < 1) throw InvalidParameter("uniform_strip_gaussians: M must be >= 1");
  std::vector<Gaussian1D> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    out.emplace_back((j + 0.5) * static_cast<double>(n) / m, stddev);
  }
  return out;
}

StripFitResult fit_strip_colors(std::vector<Gaussian1D> gaussians, const StripImage& gt,
                                const StripFitOptions& opts) {
  const int n = gt.size();
  const auto m = gaussians.size();
  // Basis values are fixed, so tabulate them once.
  std::vector<double> basis(m * static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < m; ++j) {
    gaussians[j].color = Vec3::Zero();
    for (int i = 0; i < n; ++i) basis[j * n + i] = gaussians[j].value_at(i);
  }

  const double channel_scale = opts.mode == StripChannelMode::Mean ? 1.0 / 3.0 : 1.0;
  std::vector<Vec3> first(m, Vec3::Zero()), second(m, Vec3::Zero()), grad(m);
  std::vector<Vec3> rendered(static_cast<std::size_t>(n));
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(opts.max_iters) + 1);

  auto evaluate = [&]() {
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      Vec3 acc = Vec3::Zero();
      for (std::size_t j = 0; j < m; ++j) acc += gaussians[j].color * basis[j * n + i];
      rendered[i] = acc;
      loss += (gt[i] - acc).cwiseAbs().sum();
    }
    return loss * channel_scale / n;
  };

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  StripFitResult result;
  int t = 0;
  for (; t < opts.max_iters; ++t) {
    const double loss = evaluate();
    history.push_back(loss);
    if (history.size() > static_cast<std::size_t>(opts.window) &&
        std::abs(history[history.size() - 1 - opts.window] - loss) < opts.tolerance) {
      result.converged = true;
      break;
    }
    for (std::size_t j = 0; j < m; ++j) {
      Vec3 g = Vec3::Zero();
      for (int i = 0; i < n; ++i) {
        const Vec3 r = rendered[i] - gt[i];
        // sign(0) = 0
        const Vec3 s((r.x() > 0) - (r.x() < 0), (r.y() > 0) - (r.y() < 0),
                     (r.z() > 0) - (r.z() < 0));
        g += s * basis[j * n + i];
      }
      grad[j] = g * channel_scale / n;
    }
    const int step = t + 1;
    const double lr = opts.lr / (1.0 + t / opts.decay_steps);
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    for (std::size_t j = 0; j < m; ++j) {
      first[j] = beta1 * first[j] + (1.0 - beta1) * grad[j];
      second[j] = beta2 * second[j] + (1.0 - beta2) * grad[j].cwiseProduct(grad[j]);
      const Vec3 denom = (second[j] / bc2).cwiseSqrt().array() + eps;
      gaussians[j].color -= lr * (first[j] / bc1).cwiseQuotient(denom);
    }
  }
  result.loss = evaluate();
  result.iterations = t;
  result.gaussians = std::move(gaussians);
  return result;
}

std::vector<StripSweepCell> run_strip_sweep(const StripSweepOptions& opts) {
  if (opts.m_min < 1 || opts.m_max < opts.m_min || opts.s_min < 1 || opts.s_max < opts.s_min) {
    throw InvalidParameter("strip sweep: empty or invalid M/S range");
  }
  const StripImage gt = make_stripe_target(opts.k_colors, opts.n);
  const int m_count = opts.m_max - opts.m_min + 1;
  const int s_count = opts.s_max - opts.s_min + 1;
  std::vector<StripSweepCell> cells(static_cast<std::size_t>(m_count * s_count));
  configure_threads();
#pragma omp parallel for schedule(dynamic)
  for (int idx = 0; idx < m_count * s_count; ++idx) {
    auto& cell = cells[static_cast<std::size_t>(idx)];
    cell.m = opts.m_min + idx / s_count;
    cell.s = opts.s_min + idx % s_count;
    cell.result =
        fit_strip_colors(uniform_strip_gaussians(cell.m, cell.s, opts.n), gt, opts.fit);
  }
  return cells;
}

}  // namespace fds
