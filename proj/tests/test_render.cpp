#include <doctest.h>

#include "fds/render.hpp"
#include "grad_check.hpp"
#include "support.hpp"

#include <algorithm>

using namespace fds;
using fds::test::uniform;

namespace {

Gaussian2D isotropic(Vec2 mu, double sigma, double alpha, Vec3 color) {
  Gaussian2D g;
  g.mu = mu;
  g.s_r_raw = Vec2::Zero();  // s_r = 0.5
  g.s_a = 2.0 * sigma;
  g.alpha_raw = logit(alpha);
  g.color = color;
  return g;
}

GaussianCloud random_cloud(std::mt19937_64& rng, int n, double lo, double hi) {
  GaussianCloud c;
  for (int i = 0; i < n; ++i) c.add(test::random_gaussian(rng, lo, hi));
  return c;
}

}  // namespace

TEST_CASE("footprint box arithmetic") {
  Projected2D p;
  p.mu_p = Vec2(50, 50);
  const Footprint b = footprint(p, 100, 100);
  CHECK(b.x0 == 47);
  CHECK(b.x1 == 53);
  CHECK(b.area() == 49);

  p.mu_p = Vec2(500, 20);
  CHECK(footprint(p, 100, 100).empty());

  p.mu_p = Vec2(0, 0);
  const Footprint corner = footprint(p, 100, 100);
  CHECK(corner.x0 == 0);
  CHECK(corner.y0 == 0);
  CHECK(corner.x1 == 3);
  CHECK(corner.y1 == 3);
}

TEST_CASE("single opaque Gaussian reproduces its color at the center") {
  GaussianCloud c;
  Gaussian2D g = isotropic(Vec2(5, 6), 1.5, 0.5, Vec3(200, 100, 50));
  g.alpha_raw = 60.0;  // sigmoid rounds to exactly 1
  c.add(g);
  RenderOptions opts;
  opts.background = Vec3(10, 20, 30);
  const RasterImage img = render_raster(c, AffineView{}, 12, 12, opts).image;
  CHECK(img.pixel(5, 6) == Vec3(200, 100, 50));
  CHECK(img.pixel(11, 0) == opts.background);
}

TEST_CASE("zero opacity renders background") {
  std::mt19937_64 rng(1);
  GaussianCloud c = random_cloud(rng, 20, 0, 20);
  for (auto& g : c.gaussians()) g.alpha_raw = -800.0;
  RenderOptions opts;
  opts.background = Vec3(1, 2, 3);
  const RasterImage img = render_raster(c, AffineView{}, 20, 20, opts).image;
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) CHECK(img.pixel(x, y) == opts.background);
}

TEST_CASE("two-term compositing expansion") {
  GaussianCloud c;
  const double a1 = 0.3, a2 = 0.6;
  const Vec3 c1(200, 10, 40), c2(20, 180, 90), bg(5, 6, 7);
  c.add(isotropic(Vec2(4, 4), 1.0, a1, c1));
  c.add(isotropic(Vec2(4, 4), 2.0, a2, c2));
  RenderOptions opts;
  opts.background = bg;
  const Vec3 got = render_raster(c, AffineView{}, 9, 9, opts).image.pixel(4, 4);
  const Vec3 want = c1 * a1 + c2 * a2 * (1 - a1) + bg * (1 - a1) * (1 - a2);
  CHECK((got - want).norm() < 1e-12);
}

TEST_CASE("rendering ignores storage order") {
  std::mt19937_64 rng(21);
  GaussianCloud c = random_cloud(rng, 40, 0, 32);
  const RasterImage before = render_raster(c, AffineView{}, 32, 32).image;
  std::vector<Gaussian2D> shuffled(c.gaussians().begin(), c.gaussians().end());
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  GaussianCloud d;
  for (const auto& g : shuffled) d.add_keep_key(g);
  CHECK(render_raster(d, AffineView{}, 32, 32).image == before);
}

TEST_CASE("transmittance bounds and blend weights") {
  std::mt19937_64 rng(4);
  GaussianCloud c = random_cloud(rng, 30, 0, 24);
  RenderOptions opts;
  opts.background = Vec3(255, 255, 255);
  const RenderOutput white = render_raster(c, AffineView{}, 24, 24, opts);
  const RenderOutput black = render_raster(c, AffineView{}, 24, 24);
  for (std::size_t i = 0; i < white.image.data().size(); ++i) {
    // bg * T_final, so T_final in [0,1].
    const double t = (white.image.data()[i] - black.image.data()[i]) / 255.0;
    CHECK(t >= -1e-12);
    CHECK(t <= 1.0 + 1e-12);
  }
  for (double w : black.blend_weight) CHECK(w >= 0.0);
}

TEST_CASE("footprint truncation error is bounded by the 3-sigma tail") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    GaussianCloud c;
    for (int i = 0; i < 15; ++i) {
      Gaussian2D g = test::random_gaussian(rng, 0, 24);
      g.s_r_raw = Vec2::Zero();
      g.s_a = 2.0 * uniform(rng, 0.5, 3.0);
      c.add(g);
    }
    const RasterImage cut = reference::render_raster(c, AffineView{}, 24, 24, {}, true).image;
    const RasterImage full = reference::render_raster(c, AffineView{}, 24, 24, {}, false).image;
    // Every dropped term has G' < exp(-4.5); a dropped term changes a pixel by
    // at most a_k * 255 through its own color and the attenuation it applies.
    const double bound = 2.0 * 255.0 * std::exp(-4.5) * static_cast<double>(c.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < cut.data().size(); ++i) {
      worst = std::max(worst, std::abs(cut.data()[i] - full.data()[i]));
    }
    CHECK(worst <= bound);
  }

  // At sigma = 0.5 px the outward rounding leaves at least 5 sigma of margin.
  GaussianCloud c;
  for (int i = 0; i < 10; ++i) {
    c.add(isotropic(Vec2(uniform(rng, 2, 14), uniform(rng, 2, 14)), 0.5, 0.9, Vec3(255, 255, 255)));
  }
  const RasterImage cut = reference::render_raster(c, AffineView{}, 16, 16, {}, true).image;
  const RasterImage full = reference::render_raster(c, AffineView{}, 16, 16, {}, false).image;
  for (std::size_t i = 0; i < cut.data().size(); ++i) {
    CHECK(std::abs(cut.data()[i] - full.data()[i]) <= 1e-3);
  }
}

TEST_CASE("parallel kernels match the serial reference") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const int w = 37 + trial * 11, h = 29 + trial * 7;
    GaussianCloud c = random_cloud(rng, 80, -3, std::max(w, h) + 3.0);
    const AffineView view = test::random_view(rng);
    RenderOptions opts;
    opts.background = Vec3(30, 60, 90);
    const RenderOutput fast = render_raster(c, view, w, h, opts);
    const RenderOutput slow = reference::render_raster(c, view, w, h, opts);
    CHECK(fast.image == slow.image);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(test::close(fast.blend_weight[i], slow.blend_weight[i], 1e-12, 1e-12));
    }

    const RasterImage pg = test::random_image(rng, w, h);
    const auto g_fast = backward_pixels(c, view, pg, opts);
    const auto g_slow = reference::backward_pixels(c, view, pg, opts);
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (int k = 0; k < test::kParamsPerGaussian; ++k) {
        CHECK(test::close(test::grad_component(g_fast[i], k), test::grad_component(g_slow[i], k),
                          1e-10, 1e-9));
      }
    }
  }
}

TEST_CASE("zero residual gives zero gradient") {
  std::mt19937_64 rng(12);
  GaussianCloud c = random_cloud(rng, 10, 0, 16);
  ViewSpec view;
  view.gt = render_raster(c, AffineView{}, 16, 16).image;
  const BackwardResult r = backward(c, view, LossConfig{0.0});
  CHECK(r.loss.loss == 0.0);
  for (const auto& g : r.grads) {
    for (int k = 0; k < test::kParamsPerGaussian; ++k) CHECK(test::grad_component(g, k) == 0.0);
  }
}

TEST_CASE("fused backward equals render + loss + backward_pixels") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 3; ++trial) {
    GaussianCloud c = random_cloud(rng, 60, -3, 43);
    ViewSpec view;
    view.camera = test::random_view(rng);
    view.gt = test::random_image(rng, 40, 33);
    const LossConfig cfg{0.2};
    const BackwardResult fused = backward(c, view, cfg);
    const RenderOutput out = render_raster(c, view);
    RasterImage pg;
    const LossValue v = image_loss(out.image, view.gt, cfg, &pg);
    const auto grads = backward_pixels(c, view.camera, pg);
    CHECK(fused.loss.loss == v.loss);
    CHECK(fused.forward.image == out.image);
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (int k = 0; k < test::kParamsPerGaussian; ++k) {
        CHECK(test::grad_component(fused.grads[i], k) == test::grad_component(grads[i], k));
      }
    }
  }
}

TEST_CASE("single-pixel color gradient by hand") {
  // One Gaussian, 1x1 image, rendered above the target: dL/dc = a / (255 * 3).
  GaussianCloud c;
  c.add(isotropic(Vec2(0.2, -0.1), 1.0, 0.7, Vec3(100, 100, 100)));
  ViewSpec view;
  view.gt = RasterImage(1, 1, Vec3(0, 0, 0));
  const BackwardResult r = backward(c, view, LossConfig{0.0});
  const double a = 0.7 * std::exp(-0.5 * (0.2 * 0.2 + 0.1 * 0.1));
  CHECK(r.grads[0].color.x() == doctest::Approx(a / (255.0 * 3.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradients agree with central differences") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const test::GradScene s = test::make_grad_scene(seed * 7919, 1 + static_cast<int>(seed % 4), 16);
    const auto rep = test::check_gradients(s, LossConfig{0.0}, 1e-4, 1e-4, 1e-7);
    INFO(rep.first_failure);
    CHECK(rep.failed == 0);
  }
  SUBCASE("with the SSIM term") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const test::GradScene s = test::make_grad_scene(seed * 104729, 6, 16);
      const auto rep = test::check_gradients(s, LossConfig{0.2}, 1e-4, 1e-4, 1e-7);
      INFO(rep.first_failure);
      CHECK(rep.failed == 0);
    }
  }
}

TEST_CASE("backward rejects mismatched dimensions") {
  GaussianCloud c;
  c.add(isotropic(Vec2(1, 1), 1, 0.5, Vec3(1, 1, 1)));
  CHECK_THROWS_AS((void)image_loss(RasterImage(3, 3), RasterImage(3, 4), LossConfig{}),
                  InvalidParameter);
  CHECK_THROWS_AS((void)backward_pixels(c, AffineView{}, RasterImage(0, 0)), InvalidParameter);
}
