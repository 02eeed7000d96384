#include "fds/trainer.hpp"

#include "fds/analysis.hpp"
#include "fds/confidence.hpp"
#include "fds/density.hpp"
#include "fds/density_control.hpp"
#include "fds/log.hpp"
#include "fds/ssim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace fds {

namespace {

constexpr int kParams = 10;  // mu(2) rot log_s_a s_r_raw(2) alpha_raw color(3)
constexpr int kLogScaleSlot = 3;
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

struct Moments {
  std::array<double, kParams> m{};
  std::array<double, kParams> v{};
};

std::array<double, kParams> gradient_vector(const Gaussian2D& g, const GaussianGrad& d) {
  return {d.mu.x(),      d.mu.y(),      d.rot,          g.s_a * d.s_a, d.s_r_raw.x(),
          d.s_r_raw.y(), d.alpha_raw,   d.color.x(),    d.color.y(),   d.color.z()};
}

class Adam {
 public:
  void resize(std::size_t n) { state_.assign(n, Moments{}); }
  void apply(const Origin& origin) { state_ = remap(state_, origin, Moments{}); }
  void reset_slot(int slot) {
    for (auto& s : state_) s.m[slot] = s.v[slot] = 0.0;
  }

  void step(GaussianCloud& cloud, const std::vector<GaussianGrad>& grads,
            const std::array<double, kParams>& lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      Gaussian2D& g = cloud[i];
      const auto grad = gradient_vector(g, grads[i]);
      std::array<double, kParams> delta{};
      Moments& s = state_[i];
      for (int k = 0; k < kParams; ++k) {
        s.m[k] = kBeta1 * s.m[k] + (1.0 - kBeta1) * grad[k];
        s.v[k] = kBeta2 * s.v[k] + (1.0 - kBeta2) * grad[k] * grad[k];
        const double mhat = s.m[k] / bc1;
        const double vhat = s.v[k] / bc2;
        delta[k] = -lr[k] * mhat / (std::sqrt(vhat) + kAdamEps);
      }
      g.mu += Vec2(delta[0], delta[1]);
      g.rot += delta[2];
      g.s_a *= std::exp(delta[3]);
      g.s_r_raw += Vec2(delta[4], delta[5]);
      g.alpha_raw += delta[6];
      g.color += Vec3(delta[7], delta[8], delta[9]);
      g.color = g.color.cwiseMax(0.0).cwiseMin(255.0);
    }
  }

 private:
  std::vector<Moments> state_;
  long t_ = 0;
};

double position_lr(const TrainConfig& cfg, double extent, long it) {
  if (!(cfg.lr.position_init > 0.0) || !(cfg.lr.position_final > 0.0)) return 0.0;
  const double t = std::clamp(static_cast<double>(it) / static_cast<double>(cfg.total_iters), 0.0, 1.0);
  const double log_lr = (1.0 - t) * std::log(cfg.lr.position_init) + t * std::log(cfg.lr.position_final);
  return std::exp(log_lr) * extent;
}

void write_stamp(std::ofstream& out, const std::string& stamp) {
  if (!stamp.empty()) out << stamp << '\n';
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

void close_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void TrainConfig::validate() const {
  if (total_iters < 0) throw InvalidParameter("total_iters must be non-negative");
  if (densify_interval <= 0 || confidence_interval <= 0 || opacity_reset_interval <= 0 ||
      log_interval <= 0) {
    throw InvalidParameter("schedule intervals must be positive");
  }
  if (control_end > total_iters) throw InvalidParameter("control_end exceeds total_iters");
  if (K == 0) throw InvalidParameter("K must be positive");
  if (M < 2) throw InvalidParameter("M must be at least 2");
  if (!(theta > 0.0)) throw InvalidParameter("theta must be positive");
  if (init_count == 0) throw InvalidParameter("init_count must be positive");
  if (!(init_opacity > 0.0 && init_opacity < 1.0)) {
    throw InvalidParameter("init_opacity must lie in (0,1)");
  }
}

const char* to_string(ControlKind kind) {
  switch (kind) {
    case ControlKind::Filter: return "filter";
    case ControlKind::Densify: return "densify";
    case ControlKind::Opacity: return "opacity";
    case ControlKind::Rescale: return "rescale";
  }
  return "?";
}

GaussianCloud init_from_random(std::size_t n, const RasterImage& reference, std::size_t k,
                               double theta, double init_opacity, std::mt19937_64& rng) {
  if (n == 0) throw InvalidParameter("init_from_random: n must be positive");
  if (reference.empty()) throw InvalidParameter("init_from_random: empty reference image");
  std::uniform_real_distribution<double> ux(-0.5, reference.width() - 0.5);
  std::uniform_real_distribution<double> uy(-0.5, reference.height() - 0.5);
  GaussianCloud cloud;
  for (std::size_t i = 0; i < n; ++i) {
    Gaussian2D g;
    g.mu.x() = ux(rng);
    g.mu.y() = uy(rng);
    g.color = reference.sample(g.mu);
    g.alpha_raw = logit(init_opacity);
    cloud.add(g);
  }
  if (n >= 2) {
    rescale_cloud(cloud, k, theta);
  } else {
    // No neighbours: cover the whole domain.
    cloud[0].s_a = theta * 0.5 * std::min(reference.width(), reference.height());
  }
  return cloud;
}

std::vector<ViewSpec> make_views(const RasterImage& canonical, int count) {
  if (count < 1) throw InvalidParameter("make_views: count must be positive");
  const Vec2 center(0.5 * (canonical.width() - 1), 0.5 * (canonical.height() - 1));
  const auto about_center = [&](double zoom, double degrees) {
    const double a = degrees * kPi / 180.0;
    AffineView v;
    v.linear = zoom * rotation_matrix(a);
    v.translation = center - v.linear * center;
    return v;
  };
  const std::array<AffineView, 4> cameras = {about_center(1.0, 0.0), about_center(1.1, 0.0),
                                             about_center(1.15, 5.0), about_center(1.15, -5.0)};
  std::vector<ViewSpec> views;
  for (int i = 0; i < count; ++i) {
    ViewSpec v;
    v.id = i;
    // Past the fixed set, alternate further small rotations.
    v.camera = i < static_cast<int>(cameras.size())
                   ? cameras[static_cast<std::size_t>(i)]
                   : about_center(1.15, (i % 2 == 0 ? 1.0 : -1.0) * 2.5 * (i / 2));
    v.gt = i == 0 ? canonical : warp_image(canonical, v.camera, canonical.width(), canonical.height());
    views.push_back(std::move(v));
  }
  return views;
}

double scene_extent(const RasterImage& reference) {
  return std::hypot(static_cast<double>(reference.width()), static_cast<double>(reference.height()));
}

TrainResult train(std::span<const ViewSpec> views, const TrainConfig& cfg, GaussianCloud init,
                  const CheckpointCallback& on_checkpoint) {
  cfg.validate();
  if (views.empty()) throw InvalidParameter("train: at least one view is required");
  if (init.empty()) throw InvalidParameter("train: initial cloud is empty");

  TrainResult result;
  GaussianCloud& cloud = result.cloud;
  cloud = std::move(init);
  TrainLog& log = result.log;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const double extent = scene_extent(views.front().gt);
  const LossConfig loss_cfg{cfg.ssim_lambda};
  const OpacityParams opacity{static_cast<int>(cfg.opacity_reset_interval), 0.01, 0.005};

  Adam adam;
  adam.resize(cloud.size());
  GradAccumulator accum(cloud.size());

  double loss_since = 0.0;
  long iters_since = 0;
  std::size_t filtered_since = 0;
  double last_tau = 0.0;

  const auto rescale = [&](long it) {
    if (!cfg.link) return;
    if (cloud.size() < 2) {
      log_warning("rescale skipped: fewer than two Gaussians");
      return;
    }
    rescale_cloud(cloud, cfg.K, cfg.theta);
    adam.reset_slot(kLogScaleSlot);
    log.events.push_back({it, ControlKind::Rescale, cloud.size(), 0.0, 0, 0, false});
  };

  for (long it = 1; it <= cfg.total_iters; ++it) {
    const ViewSpec& view = views[static_cast<std::size_t>((it - 1) % static_cast<long>(views.size()))];
    const BackwardResult br = backward(cloud, view, loss_cfg);
    if (!std::isfinite(br.loss.loss)) {
      if (!cfg.divergence_dump.empty()) write_cloud_csv(cloud, cfg.divergence_dump);
      throw DivergenceError("loss is not finite at iteration " + std::to_string(it), it);
    }
    log.iterations.push_back({it, view.id, br.loss.loss, br.loss.l1, br.loss.ssim, cloud.size()});
    loss_since += br.loss.loss;
    ++iters_since;

    const double half_w = 0.5 * view.gt.width(), half_h = 0.5 * view.gt.height();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (br.forward.blend_weight[i] > 0.0) {
        const Vec2& d = br.grads[i].mu_p;
        accum.add(i, std::hypot(d.x() * half_w, d.y() * half_h));
      }
    }

    const std::array<double, kParams> lr = {
        position_lr(cfg, extent, it), position_lr(cfg, extent, it), cfg.lr.rotation,
        cfg.lr.scale_log, cfg.lr.scale_rel, cfg.lr.scale_rel, cfg.lr.opacity,
        cfg.lr.color, cfg.lr.color, cfg.lr.color};
    adam.step(cloud, br.grads, lr);

    if (it < cfg.control_end) {
      bool changed = false;
      const auto absorb = [&](const Origin& origin) {
        adam.apply(origin);
        accum.apply(origin);
      };

      if (it % cfg.confidence_interval == 0) {
        std::size_t removed = 0;
        if (cfg.confidence_filter) {
          FilterReport rep = apply_filter(cloud, views, cfg.M, cfg.tau_c);
          removed = rep.removed;
          absorb(rep.origin);
        } else {
          MaintenanceReport rep = prune_large(cloud, extent, cfg.large_fraction);
          removed = rep.pruned;
          absorb(rep.origin);
        }
        filtered_since += removed;
        changed |= removed > 0;
        log.events.push_back({it, ControlKind::Filter, cloud.size(), 0.0, 0, removed, false});
      }

      if (it >= cfg.densify_start && it % cfg.densify_interval == 0) {
        std::vector<double> observed;
        for (std::size_t i = 0; i < accum.size(); ++i) {
          if (accum.count(i) > 0) observed.push_back(accum.mean(i));
        }
        if (!observed.empty()) {
          ThresholdStats stats = dynamic_threshold(observed, cfg.grad_preset);
          if (!cfg.dynamic_threshold) stats.tau_pos = cfg.fixed_threshold;
          last_tau = stats.tau_pos;
          const std::size_t before = cloud.size();
          DensifyReport rep = densify(cloud, stats, accum, extent, rng);
          adam.apply(rep.origin);
          changed |= rep.cloned + rep.split > 0;
          log.events.push_back({it, ControlKind::Densify, cloud.size(), stats.tau_pos,
                                cloud.size() - before, 0, false});
        } else {
          accum.reset(cloud.size());
        }

        MaintenanceReport om = opacity_maintenance(cloud, it, opacity);
        absorb(om.origin);
        accum.reset(cloud.size());
        changed |= om.pruned > 0;
        log.events.push_back({it, ControlKind::Opacity, cloud.size(), 0.0, 0, om.pruned, om.reset});
      }

      if (changed) rescale(it);
    }

    if (cloud.empty()) throw NumericalError("every Gaussian was removed at iteration " + std::to_string(it));

    if (it % cfg.log_interval == 0 || it == cfg.total_iters) {
      const ViewSpec& eval = views.front();
      const RenderOutput out = render_raster(cloud, eval, {});
      Checkpoint cp;
      cp.iteration = it;
      cp.train_loss = loss_since / static_cast<double>(iters_since);
      cp.psnr = psnr(out.image, eval.gt);
      cp.ssim = ssim(out.image, eval.gt);
      cp.count = cloud.size();
      cp.tau_pos = last_tau;
      cp.filter_deletions = filtered_since;
      log.checkpoints.push_back(cp);
      if (on_checkpoint) on_checkpoint(cp);
      loss_since = 0.0;
      iters_since = 0;
      filtered_since = 0;
    }
  }
  return result;
}

void write_checkpoints_csv(const TrainLog& log, const std::filesystem::path& path,
                           const std::string& stamp) {
  auto out = open_csv(path);
  write_stamp(out, stamp);
  out << "iteration,train_loss,psnr,ssim,count,tau_pos,filter_deletions\n";
  for (const auto& c : log.checkpoints) {
    out << c.iteration << ',' << c.train_loss << ',' << c.psnr << ',' << c.ssim << ',' << c.count
        << ',' << c.tau_pos << ',' << c.filter_deletions << '\n';
  }
  close_csv(out, path);
}

void write_convergence_csv(const TrainLog& log, const std::filesystem::path& path,
                           const std::string& stamp) {
  auto out = open_csv(path);
  write_stamp(out, stamp);
  out << "iteration,view,loss,l1,ssim,count\n";
  for (const auto& r : log.iterations) {
    out << r.iteration << ',' << r.view << ',' << r.loss << ',' << r.l1 << ',' << r.ssim << ','
        << r.count << '\n';
  }
  close_csv(out, path);
}

void write_events_csv(const TrainLog& log, const std::filesystem::path& path,
                      const std::string& stamp) {
  auto out = open_csv(path);
  write_stamp(out, stamp);
  out << "iteration,kind,count_after,tau_pos,added,removed,reset\n";
  for (const auto& e : log.events) {
    out << e.iteration << ',' << to_string(e.kind) << ',' << e.count_after << ',' << e.tau_pos
        << ',' << e.added << ',' << e.removed << ',' << (e.reset ? 1 : 0) << '\n';
  }
  close_csv(out, path);
}

}  // namespace fds
