#include "fds/render.hpp"

#include "fds/parallel.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace fds {

Footprint footprint(const Projected2D& p, int width, int height) {
  const double rx = kFootprintSigmas * std::sqrt(std::max(p.sigma_p(0, 0), 0.0));
  const double ry = kFootprintSigmas * std::sqrt(std::max(p.sigma_p(1, 1), 0.0));
  const double fx0 = std::floor(p.mu_p.x() - rx);
  const double fx1 = std::ceil(p.mu_p.x() + rx);
  const double fy0 = std::floor(p.mu_p.y() - ry);
  const double fy1 = std::ceil(p.mu_p.y() + ry);
  Footprint box;
  if (!std::isfinite(fx0) || !std::isfinite(fx1) || !std::isfinite(fy0) || !std::isfinite(fy1) ||
      fx1 < 0.0 || fy1 < 0.0 || fx0 > width - 1 || fy0 > height - 1) {
    return box;
  }
  box.x0 = static_cast<int>(std::max(fx0, 0.0));
  box.y0 = static_cast<int>(std::max(fy0, 0.0));
  box.x1 = static_cast<int>(std::min(fx1, static_cast<double>(width - 1)));
  box.y1 = static_cast<int>(std::min(fy1, static_cast<double>(height - 1)));
  return box;
}

namespace {

constexpr int kTile = 16;

// Per-Gaussian accumulator layout used by both backward implementations.
enum Slot : int { kMuX, kMuY, kConXX, kConXY, kConYY, kAlpha, kColR, kColG, kColB, kSlots };

struct Prepared {
  std::size_t src = 0;
  Vec2 mu_p;
  double cxx = 0, cxy = 0, cyy = 0;
  double alpha = 0;
  Vec3 color;
  Footprint box;

  [[nodiscard]] double gauss(double dx, double dy) const {
    return std::exp(-0.5 * (cxx * dx * dx + 2.0 * cxy * dx * dy + cyy * dy * dy));
  }
};

std::vector<std::size_t> composite_order(const GaussianCloud& cloud) {
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cloud[a].order_key < cloud[b].order_key;
  });
  return order;
}

// Returns false when the projected covariance is not positive definite.
bool prepare_one(const Gaussian2D& g, std::size_t src, const AffineView& camera, int width,
                 int height, bool clip, Prepared& out) {
  const Vec2 s = g.scale();
  if (!(s.x() > 0.0) || !(s.y() > 0.0)) return false;
  const Projected2D p = project(g, camera);
  const double det = p.sigma_p(0, 0) * p.sigma_p(1, 1) - p.sigma_p(0, 1) * p.sigma_p(1, 0);
  if (!(det > 0.0) || !std::isfinite(det)) return false;
  out.src = src;
  out.mu_p = p.mu_p;
  out.cxx = p.sigma_p(1, 1) / det;
  out.cxy = -p.sigma_p(0, 1) / det;
  out.cyy = p.sigma_p(0, 0) / det;
  out.alpha = g.alpha();
  out.color = g.color;
  if (clip) {
    out.box = footprint(p, width, height);
  } else {
    out.box = Footprint{0, 0, width - 1, height - 1};
  }
  return !out.box.empty();
}

struct TileEntry {
  int prepared;
  int slot;  // index into the owning band's member list
};

// Gaussians prepared in compositing order and binned into 16x16 tiles.
struct Frame {
  int width = 0, height = 0;
  int tiles_x = 0, bands = 0;
  std::vector<Prepared> prepared;
  std::vector<std::vector<TileEntry>> tiles;
  std::vector<std::vector<int>> band_members;

  Frame(const GaussianCloud& cloud, const AffineView& camera, int w, int h)
      : width(w), height(h) {
    if (w <= 0 || h <= 0) throw InvalidParameter("render: image dimensions must be positive");
    // Validates the view even for an empty cloud.
    (void)inverse(camera);
    tiles_x = (w + kTile - 1) / kTile;
    bands = (h + kTile - 1) / kTile;
    tiles.resize(static_cast<std::size_t>(tiles_x * bands));
    band_members.resize(static_cast<std::size_t>(bands));

    const auto order = composite_order(cloud);
    prepared.reserve(order.size());
    Prepared p;
    for (std::size_t idx : order) {
      if (prepare_one(cloud[idx], idx, camera, w, h, true, p)) prepared.push_back(p);
    }
    for (int pi = 0; pi < static_cast<int>(prepared.size()); ++pi) {
      const Footprint& b = prepared[static_cast<std::size_t>(pi)].box;
      const int tx0 = b.x0 / kTile, tx1 = b.x1 / kTile;
      const int ty0 = b.y0 / kTile, ty1 = b.y1 / kTile;
      for (int ty = ty0; ty <= ty1; ++ty) {
        auto& members = band_members[static_cast<std::size_t>(ty)];
        const int slot = static_cast<int>(members.size());
        members.push_back(pi);
        for (int tx = tx0; tx <= tx1; ++tx) {
          tiles[static_cast<std::size_t>(ty * tiles_x + tx)].push_back({pi, slot});
        }
      }
    }
  }

  [[nodiscard]] const std::vector<TileEntry>& tile(int tx, int ty) const {
    return tiles[static_cast<std::size_t>(ty * tiles_x + tx)];
  }
};

// Pixel range of box b inside tile (tx, band), empty when they do not meet.
struct Span2 {
  int x0, x1, y0, y1;
};

Span2 clip_to_tile(const Footprint& b, int tx, int band, int width, int height) {
  return {std::max(b.x0, tx * kTile), std::min({b.x1, (tx + 1) * kTile - 1, width - 1}),
          std::max(b.y0, band * kTile), std::min({b.y1, (band + 1) * kTile - 1, height - 1})};
}

constexpr int kTilePixels = kTile * kTile;

int tile_pixel(int x, int y, int tx, int band) { return (y - band * kTile) * kTile + (x - tx * kTile); }

struct Contribution {
  int prepared;
  int slot;
  double dx, dy, g, a, t;
};

// Falloff values G per box/tile overlap, in the order forward() visits them.
// backward() reuses them instead of evaluating exp a second time.
using FalloffCache = std::vector<std::vector<double>>;

// Tiles are composited Gaussian by Gaussian over each box/tile overlap. Every
// pixel still sees its Gaussians in compositing order and every per-Gaussian
// sum still runs in row-major pixel order, so the arithmetic is the same as a
// per-pixel loop.
RenderOutput forward(const Frame& f, std::size_t cloud_size, const RenderOptions& opts,
                     FalloffCache* falloff = nullptr) {
  if (falloff != nullptr) falloff->assign(f.tiles.size(), {});
  RenderOutput out{RasterImage(f.width, f.height), std::vector<double>(cloud_size, 0.0)};
  std::vector<std::vector<double>> band_weight(static_cast<std::size_t>(f.bands));

  configure_threads();
#pragma omp parallel
  {
    std::array<double, kTilePixels> trans{};
    std::array<Vec3, kTilePixels> color{};
#pragma omp for schedule(dynamic)
    for (int band = 0; band < f.bands; ++band) {
      auto& weight = band_weight[static_cast<std::size_t>(band)];
      weight.assign(f.band_members[static_cast<std::size_t>(band)].size(), 0.0);
      const int y_end = std::min(f.height, (band + 1) * kTile);
      for (int tx = 0; tx < f.tiles_x; ++tx) {
        trans.fill(1.0);
        color.fill(Vec3::Zero());
        std::vector<double>* keep =
            falloff != nullptr ? &(*falloff)[static_cast<std::size_t>(band * f.tiles_x + tx)] : nullptr;
        for (const auto& e : f.tile(tx, band)) {
          const Prepared& p = f.prepared[static_cast<std::size_t>(e.prepared)];
          const Span2 r = clip_to_tile(p.box, tx, band, f.width, f.height);
          double& w = weight[static_cast<std::size_t>(e.slot)];
          for (int y = r.y0; y <= r.y1; ++y) {
            for (int x = r.x0; x <= r.x1; ++x) {
              const auto i = static_cast<std::size_t>(tile_pixel(x, y, tx, band));
              const double g = p.gauss(x - p.mu_p.x(), y - p.mu_p.y());
              if (keep != nullptr) keep->push_back(g);
              const double a = p.alpha * g;
              const double at = a * trans[i];
              color[i] += p.color * at;
              w += at;
              trans[i] *= 1.0 - a;
            }
          }
        }
        const int x_end = std::min(f.width, (tx + 1) * kTile);
        for (int y = band * kTile; y < y_end; ++y) {
          for (int x = tx * kTile; x < x_end; ++x) {
            const auto i = static_cast<std::size_t>(tile_pixel(x, y, tx, band));
            out.image.set_pixel(x, y, color[i] + opts.background * trans[i]);
          }
        }
      }
    }
  }

  for (int band = 0; band < f.bands; ++band) {
    const auto& members = f.band_members[static_cast<std::size_t>(band)];
    const auto& weight = band_weight[static_cast<std::size_t>(band)];
    for (std::size_t s = 0; s < members.size(); ++s) {
      out.blend_weight[f.prepared[static_cast<std::size_t>(members[s])].src] += weight[s];
    }
  }
  return out;
}

// One Gaussian's share of one pixel's gradient, visited back to front.
// `remaining` is the color composited behind it.
void backward_step(const Prepared& p, const Contribution& c, const Vec3& d_color, Vec3& remaining,
                   double* a) {
  const double at = c.a * c.t;
  a[kColR] += d_color.x() * at;
  a[kColG] += d_color.y() * at;
  a[kColB] += d_color.z() * at;
  const double d_a = c.t * d_color.dot(p.color - remaining);
  remaining = p.color * c.a + (1.0 - c.a) * remaining;
  a[kAlpha] += d_a * c.g;
  const double d_q = -0.5 * c.g * d_a * p.alpha;
  const double dx = c.dx, dy = c.dy;
  a[kMuX] -= d_q * 2.0 * (p.cxx * dx + p.cxy * dy);
  a[kMuY] -= d_q * 2.0 * (p.cxy * dx + p.cyy * dy);
  a[kConXX] += d_q * dx * dx;
  a[kConXY] += d_q * dx * dy;
  a[kConYY] += d_q * dy * dy;
}

// Accumulates one pixel's gradient into `acc` (kSlots doubles per slot).
template <typename SlotOf>
void backward_pixel(const std::vector<Prepared>& prepared, std::vector<Contribution>& contrib,
                    const Vec3& d_color, const Vec3& background, double* acc, SlotOf slot_of) {
  Vec3 remaining = background;
  for (auto it = contrib.rbegin(); it != contrib.rend(); ++it) {
    backward_step(prepared[static_cast<std::size_t>(it->prepared)], *it, d_color, remaining,
                  acc + static_cast<std::size_t>(slot_of(*it)) * kSlots);
  }
}

std::vector<GaussianGrad> finish_gradients(const GaussianCloud& cloud, const AffineView& camera,
                                           const std::vector<double>& acc) {
  std::vector<GaussianGrad> grads(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double* a = acc.data() + i * kSlots;
    if (std::all_of(a, a + kSlots, [](double v) { return v == 0.0; })) continue;
    Mat2 d_conic;
    d_conic << a[kConXX], a[kConXY], a[kConXY], a[kConYY];
    grads[i] = chain_to_parameters(cloud[i], camera, Vec2(a[kMuX], a[kMuY]), d_conic, a[kAlpha],
                                   Vec3(a[kColR], a[kColG], a[kColB]));
  }
  return grads;
}

std::vector<GaussianGrad> backward_frame(const Frame& f, const GaussianCloud& cloud, const AffineView& camera,
                                         const RasterImage& pixel_grad, const RenderOptions& opts,
                                         const FalloffCache* falloff = nullptr) {
  if (pixel_grad.width() != f.width || pixel_grad.height() != f.height) {
    throw InvalidParameter("backward: pixel gradient dimensions differ from the render");
  }
  std::vector<std::vector<double>> band_acc(static_cast<std::size_t>(f.bands));

  configure_threads();
#pragma omp parallel
  {
    std::vector<Contribution> records;
    std::vector<std::size_t> first;
    std::array<double, kTilePixels> trans{};
    std::array<Vec3, kTilePixels> remaining{};
    std::array<Vec3, kTilePixels> d_color{};
    std::array<bool, kTilePixels> active{};
#pragma omp for schedule(dynamic)
    for (int band = 0; band < f.bands; ++band) {
      auto& acc = band_acc[static_cast<std::size_t>(band)];
      acc.assign(f.band_members[static_cast<std::size_t>(band)].size() * kSlots, 0.0);
      const int y_end = std::min(f.height, (band + 1) * kTile);
      for (int tx = 0; tx < f.tiles_x; ++tx) {
        const auto& list = f.tile(tx, band);
        if (list.empty()) continue;
        const int x_end = std::min(f.width, (tx + 1) * kTile);
        bool any = false;
        for (int y = band * kTile; y < y_end; ++y) {
          for (int x = tx * kTile; x < x_end; ++x) {
            const auto i = static_cast<std::size_t>(tile_pixel(x, y, tx, band));
            d_color[i] = pixel_grad.pixel(x, y);
            active[i] = !d_color[i].isZero(0.0);
            any |= active[i];
          }
        }
        if (!any) continue;

        // Overlaps in compositing order, with the offset of each Gaussian's
        // first one; then walk them back to front.
        trans.fill(1.0);
        records.clear();
        first.clear();
        const double* cached =
            falloff != nullptr ? (*falloff)[static_cast<std::size_t>(band * f.tiles_x + tx)].data()
                               : nullptr;
        for (const auto& e : list) {
          first.push_back(records.size());
          const Prepared& p = f.prepared[static_cast<std::size_t>(e.prepared)];
          const Span2 r = clip_to_tile(p.box, tx, band, f.width, f.height);
          for (int y = r.y0; y <= r.y1; ++y) {
            for (int x = r.x0; x <= r.x1; ++x) {
              const auto i = static_cast<std::size_t>(tile_pixel(x, y, tx, band));
              const double dx = x - p.mu_p.x(), dy = y - p.mu_p.y();
              const double g = cached != nullptr ? *cached++ : p.gauss(dx, dy);
              const double a = p.alpha * g;
              records.push_back({e.prepared, e.slot, dx, dy, g, a, trans[i]});
              trans[i] *= 1.0 - a;
            }
          }
        }

        remaining.fill(opts.background);
        for (std::size_t k = list.size(); k-- > 0;) {
          const auto& e = list[k];
          const Prepared& p = f.prepared[static_cast<std::size_t>(e.prepared)];
          const Span2 r = clip_to_tile(p.box, tx, band, f.width, f.height);
          double* slot = acc.data() + static_cast<std::size_t>(e.slot) * kSlots;
          std::size_t at = first[k];
          for (int y = r.y0; y <= r.y1; ++y) {
            for (int x = r.x0; x <= r.x1; ++x, ++at) {
              const auto i = static_cast<std::size_t>(tile_pixel(x, y, tx, band));
              if (!active[i]) continue;
              backward_step(p, records[at], d_color[i], remaining[i], slot);
            }
          }
        }
      }
    }
  }

  std::vector<double> acc(cloud.size() * kSlots, 0.0);
  for (int band = 0; band < f.bands; ++band) {
    const auto& members = f.band_members[static_cast<std::size_t>(band)];
    const auto& local = band_acc[static_cast<std::size_t>(band)];
    for (std::size_t s = 0; s < members.size(); ++s) {
      double* dst = acc.data() + f.prepared[static_cast<std::size_t>(members[s])].src * kSlots;
      for (int k = 0; k < kSlots; ++k) dst[k] += local[s * kSlots + k];
    }
  }
  return finish_gradients(cloud, camera, acc);
}

void check_same_size(const RasterImage& a, const RasterImage& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidParameter(std::string(what) + ": image dimensions differ");
  }
}

}  // namespace

GaussianGrad chain_to_parameters(const Gaussian2D& g, const AffineView& camera,
                                 const Vec2& d_mu_p, const Mat2& d_conic, double d_alpha,
                                 const Vec3& d_color) {
  GaussianGrad out;
  const Mat2& lin = camera.linear;
  const Projected2D p = project(g, camera);
  const double det = p.sigma_p(0, 0) * p.sigma_p(1, 1) - p.sigma_p(0, 1) * p.sigma_p(1, 0);
  Mat2 conic;
  conic << p.sigma_p(1, 1) / det, -p.sigma_p(0, 1) / det, -p.sigma_p(1, 0) / det,
      p.sigma_p(0, 0) / det;
  const Mat2 d_sigma_p = -conic.transpose() * d_conic * conic.transpose();
  const Mat2 d_sigma = lin.transpose() * d_sigma_p * lin;

  const Vec2 sr = g.s_r();
  const Vec2 s = g.s_a * sr;
  const Vec2 u(std::cos(g.rot), std::sin(g.rot));
  const Vec2 v(-u.y(), u.x());
  const double d_s1 = 2.0 * s.x() * u.dot(d_sigma * u);
  const double d_s2 = 2.0 * s.y() * v.dot(d_sigma * v);
  out.rot = (s.x() * s.x() - s.y() * s.y()) * (u.dot(d_sigma * v) + v.dot(d_sigma * u));
  out.s_a = d_s1 * sr.x() + d_s2 * sr.y();
  out.s_r_raw = Vec2(d_s1 * g.s_a * sr.x() * (1.0 - sr.x()), d_s2 * g.s_a * sr.y() * (1.0 - sr.y()));
  const double alpha = g.alpha();
  out.alpha_raw = d_alpha * alpha * (1.0 - alpha);
  out.color = d_color;
  out.mu_p = d_mu_p;
  out.mu = lin.transpose() * d_mu_p;
  return out;
}

RenderOutput render_raster(const GaussianCloud& cloud, const AffineView& camera, int width,
                           int height, const RenderOptions& opts) {
  const Frame frame(cloud, camera, width, height);
  return forward(frame, cloud.size(), opts);
}

RenderOutput render_raster(const GaussianCloud& cloud, const ViewSpec& view,
                           const RenderOptions& opts) {
  return render_raster(cloud, view.camera, view.gt.width(), view.gt.height(), opts);
}

std::vector<GaussianGrad> backward_pixels(const GaussianCloud& cloud, const AffineView& camera,
                                          const RasterImage& pixel_grad,
                                          const RenderOptions& opts) {
  const Frame frame(cloud, camera, pixel_grad.width(), pixel_grad.height());
  return backward_frame(frame, cloud, camera, pixel_grad, opts);
}

BackwardResult backward(const GaussianCloud& cloud, const ViewSpec& view, const LossConfig& cfg,
                        const RenderOptions& opts) {
  const Frame frame(cloud, view.camera, view.gt.width(), view.gt.height());
  BackwardResult result;
  FalloffCache falloff;
  result.forward = forward(frame, cloud.size(), opts, &falloff);
  check_same_size(result.forward.image, view.gt, "backward");
  RasterImage pixel_grad;
  result.loss = image_loss(result.forward.image, view.gt, cfg, &pixel_grad);
  result.grads = backward_frame(frame, cloud, view.camera, pixel_grad, opts, &falloff);
  result.mu_p_grad_norm.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    result.mu_p_grad_norm[i] = result.grads[i].mu_p.norm();
  }
  return result;
}

namespace reference {

namespace {

std::vector<Prepared> prepare_all(const GaussianCloud& cloud, const AffineView& camera, int width,
                                  int height, bool use_footprint) {
  (void)inverse(camera);
  std::vector<Prepared> out;
  Prepared p;
  for (std::size_t idx : composite_order(cloud)) {
    if (prepare_one(cloud[idx], idx, camera, width, height, use_footprint, p)) out.push_back(p);
  }
  return out;
}

}  // namespace

RenderOutput render_raster(const GaussianCloud& cloud, const AffineView& camera, int width,
                           int height, const RenderOptions& opts, bool use_footprint) {
  const auto prepared = prepare_all(cloud, camera, width, height, use_footprint);
  RenderOutput out{RasterImage(width, height), std::vector<double>(cloud.size(), 0.0)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double t = 1.0;
      Vec3 c = Vec3::Zero();
      for (const auto& p : prepared) {
        if (!p.box.contains(x, y)) continue;
        const double a = p.alpha * p.gauss(x - p.mu_p.x(), y - p.mu_p.y());
        c += p.color * (a * t);
        out.blend_weight[p.src] += a * t;
        t *= 1.0 - a;
      }
      out.image.set_pixel(x, y, c + opts.background * t);
    }
  }
  return out;
}

std::vector<GaussianGrad> backward_pixels(const GaussianCloud& cloud, const AffineView& camera,
                                          const RasterImage& pixel_grad,
                                          const RenderOptions& opts) {
  const int width = pixel_grad.width(), height = pixel_grad.height();
  const auto prepared = prepare_all(cloud, camera, width, height, true);
  std::vector<double> acc(cloud.size() * kSlots, 0.0);
  std::vector<Contribution> contrib;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      contrib.clear();
      double t = 1.0;
      for (int pi = 0; pi < static_cast<int>(prepared.size()); ++pi) {
        const Prepared& p = prepared[static_cast<std::size_t>(pi)];
        if (!p.box.contains(x, y)) continue;
        const double dx = x - p.mu_p.x(), dy = y - p.mu_p.y();
        const double g = p.gauss(dx, dy);
        contrib.push_back({pi, 0, dx, dy, g, p.alpha * g, t});
        t *= 1.0 - p.alpha * g;
      }
      backward_pixel(prepared, contrib, pixel_grad.pixel(x, y), opts.background, acc.data(),
                     [&](const Contribution& c) {
                       return static_cast<int>(prepared[static_cast<std::size_t>(c.prepared)].src);
                     });
    }
  }
  return finish_gradients(cloud, camera, acc);
}

}  // namespace reference

}  // namespace fds
