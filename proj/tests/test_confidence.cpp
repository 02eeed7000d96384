#include <doctest.h>

#include "confidence_fixtures.hpp"
#include "fds/confidence.hpp"
#include "fds/render.hpp"
#include "fds/ssim.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

using namespace fds;
using fds::test::uniform;

TEST_CASE("sample pattern shape") {
  const SamplePattern& p = SamplePattern::standard();
  CHECK(p.directions.size() == 8);
  for (const auto& d : p.directions) CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.radii.size() == 6);
  CHECK(kSamplePoints == 49);
}

TEST_CASE("sample_footprint uses Sigma' directly") {
  Projected2D p;
  p.mu_p = Vec2(10, 10);
  const ViewSamples s = sample_footprint(p);
  // radius 1.0 is the second radius; direction (1, 0) is the fifth.
  CHECK(s.points[8 + 4] == Vec2(11, 10));
  CHECK(s.weights[8 + 4] == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(s.points[48] == p.mu_p);
  CHECK(s.weights[48] == 1.0);

  p.sigma_p = Vec2(4, 1).asDiagonal();
  const ViewSamples a = sample_footprint(p);
  CHECK(a.points[4] == Vec2(12, 10));
  CHECK(a.weights[4] == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  for (double w : a.weights) {
    CHECK(w > 0.0);
    CHECK(w <= 1.0);
  }
}

TEST_CASE("view_contribution matches an exhaustive sum") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Gaussian2D g = test::random_gaussian(rng, -5, 40);
    ViewSpec v;
    v.camera = test::random_view(rng);
    v.gt = RasterImage(33, 27);
    const Projected2D p = project(g, v.camera);
    const Footprint box = footprint(p, 33, 27);
    double want = 0.0;
    for (int y = 0; y < 27; ++y) {
      for (int x = 0; x < 33; ++x) {
        if (box.contains(x, y)) want += g.alpha() * eval_gaussian(p, Vec2(x, y));
      }
    }
    CHECK(view_contribution(g, v) == doctest::Approx(want).epsilon(1e-12));
  }
  Gaussian2D off;
  off.mu = Vec2(-100, 5);
  ViewSpec v{0, AffineView{}, RasterImage(10, 10)};
  CHECK(view_contribution(off, v) == 0.0);
  Gaussian2D clear;
  clear.mu = Vec2(5, 5);
  clear.alpha_raw = -1e4;
  CHECK(view_contribution(clear, v) == 0.0);
}

TEST_CASE("top_m_views ranking") {
  const std::vector<double> c{3, 1, 2};
  CHECK(top_m_views(c, 2) == std::vector<std::size_t>{0, 2});
  const std::vector<double> eq(6, 1.5);
  CHECK(top_m_views(eq, 3) == std::vector<std::size_t>{0, 1, 2});

  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> r(100);
    for (double& v : r) v = std::floor(uniform(rng, 0, 30));  // plenty of ties
    std::vector<std::size_t> idx(r.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return r[a] > r[b]; });
    for (std::size_t m : {std::size_t{2}, std::size_t{7}}) {
      CHECK(top_m_views(r, m) == std::vector<std::size_t>(idx.begin(), idx.begin() + m));
    }
  }
}

TEST_CASE("weighted_ssim matches the transcription oracle") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const RasterImage a = test::random_image(rng, 20, 20);
    const RasterImage b = test::random_image(rng, 20, 20);
    const ViewSamples s1 = test::random_samples(rng, 19);
    const ViewSamples si = test::random_samples(rng, 19);
    CHECK(std::abs(weighted_ssim(s1, si, a, b) - test::weighted_ssim_oracle(s1, si, a, b)) <=
          1e-10);
  }
}

TEST_CASE("weighted_ssim limits") {
  std::mt19937_64 rng(4);
  const RasterImage a = test::random_image(rng, 16, 16);
  const ViewSamples s = test::random_samples(rng, 15);
  CHECK(std::abs(weighted_ssim(s, s, a, a) - 1.0) <= 1e-12);

  const RasterImage ca(8, 8, Vec3(40, 40, 40)), cb(8, 8, Vec3(200, 200, 200));
  const double want = (2 * 40 * 200 + kSsimC1) / (40 * 40 + 200 * 200 + kSsimC1);
  CHECK(weighted_ssim(s, s, ca, cb) == doctest::Approx(want).epsilon(1e-10));
  CHECK(weighted_ssim(s, s, cb, ca) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("confidence on identical views is one") {
  const RasterImage img = test::texture(32, 32);
  std::vector<ViewSpec> views{{0, AffineView{}, img}, {1, AffineView{}, img}};
  Gaussian2D g;
  g.mu = Vec2(12, 15);
  g.s_a = 2.0;
  const auto s = confidence(g, views, 2);
  REQUIRE(s.has_value());
  CHECK(std::abs(s->value - 1.0) <= 1e-12);
  CHECK(s->views == std::vector<int>{0, 1});
}

TEST_CASE("confidence averages the non-reference views") {
  const test::TwoViewFixture f = test::two_view_fixture();
  std::vector<ViewSpec> three = f.views;
  three.push_back(f.views[1]);
  three[2].id = 2;
  three[2].camera.translation = Vec2(0.5, 0.3);  // a slightly different third view
  three[2].gt = warp_image(test::texture(64, 64), three[2].camera, 64, 64);
  const Gaussian2D& g = f.consistent;
  const auto s = confidence(g, three, 3);
  REQUIRE(s.has_value());
  const ViewSpec& ref = three[static_cast<std::size_t>(s->views[0])];
  const ViewSamples s1 = sample_footprint(project(g, ref.camera));
  double want = 0.0;
  for (int i = 1; i < 3; ++i) {
    const ViewSpec& v = three[static_cast<std::size_t>(s->views[static_cast<std::size_t>(i)])];
    want += weighted_ssim(s1, sample_footprint(project(g, v.camera)), ref.gt, v.gt);
  }
  CHECK(s->value == doctest::Approx(want / 2).epsilon(1e-14));
}

TEST_CASE("two-view fixture separates consistent and inconsistent Gaussians") {
  const test::TwoViewFixture f = test::two_view_fixture();
  const auto good = confidence(f.consistent, f.views, 2);
  const auto bad = confidence(f.inconsistent, f.views, 2);
  REQUIRE(good.has_value());
  REQUIRE(bad.has_value());
  CHECK(good->value > 0.9);
  CHECK(bad->value < 0.2);
}

TEST_CASE("unscorable Gaussians are kept") {
  const test::TwoViewFixture f = test::two_view_fixture();
  Gaussian2D off = f.consistent;
  off.mu = Vec2(-500, 0);
  CHECK_FALSE(confidence(off, f.views, 2).has_value());
  CHECK_THROWS_AS((void)confidence(off, f.views, 1), InvalidParameter);

  GaussianCloud c;
  c.add(f.consistent);
  c.add(off);
  c.add(f.inconsistent);
  c.add(f.consistent);
  const GaussianCloud before = c;
  const FilterReport r = apply_filter(c, f.views, 2, 0.2);
  CHECK(r.removed == 1);
  CHECK(r.unscorable == 1);
  CHECK(r.origin == Origin{0, 1, 3});
  REQUIRE(c.size() == 3);
  CHECK(c[1].mu == off.mu);
  CHECK(c[2].order_key == before[3].order_key);
}

TEST_CASE("filter is the identity when every score clears the threshold") {
  const test::TwoViewFixture f = test::two_view_fixture();
  GaussianCloud c;
  for (int i = 0; i < 5; ++i) {
    Gaussian2D g = f.consistent;
    g.mu += Vec2(i, 2 * i);
    c.add(g);
  }
  CHECK(apply_filter(c, f.views, 2, 0.2).removed == 0);
  CHECK(c.size() == 5);
  CHECK(apply_filter(c, f.views, 5, 0.2).removed == 0);  // M clamped to 2
}

TEST_CASE("confidence is invariant under a shared integer warp") {
  const RasterImage canon = test::texture(48, 48);
  AffineView shift;
  shift.translation = Vec2(1.0, 0.0);
  std::vector<ViewSpec> views{{0, AffineView{}, canon}, {1, shift, warp_image(canon, shift, 48, 48)}};
  Gaussian2D g;
  g.mu = Vec2(20, 22);
  g.s_a = 1.6;
  g.rot = 0.4;
  g.s_r_raw = Vec2(0.5, -0.5);
  const double before = confidence(g, views, 2)->value;

  // Translate every camera and image by the same whole-pixel offset.
  AffineView move;
  move.translation = Vec2(3.0, 2.0);
  std::vector<ViewSpec> moved;
  for (const auto& v : views) {
    ViewSpec w = v;
    w.camera = compose(move, v.camera);
    w.gt = RasterImage(48, 48);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x)
        w.gt.set_pixel(x, y, v.gt.pixel(std::max(x - 3, 0), std::max(y - 2, 0)));
    moved.push_back(std::move(w));
  }
  CHECK(std::abs(confidence(g, moved, 2)->value - before) <= 1e-6);
}

TEST_CASE("confidence csv") {
  std::vector<std::optional<ConfidenceScore>> scores(2);
  scores[0] = ConfidenceScore{0.5, {3, 1}};
  const auto path = std::filesystem::temp_directory_path() / "fds_conf.csv";
  write_confidence_csv(scores, path);
  std::ifstream in(path);
  std::string a, b, c;
  std::getline(in, a);
  std::getline(in, b);
  std::getline(in, c);
  CHECK(a == "id,score,reference_view");
  CHECK(b == "0,0.5,3");
  CHECK(c == "1,,");
}
