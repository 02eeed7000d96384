#include <doctest.h>

#include "fds/density.hpp"
#include "fds/kdtree.hpp"
#include "knn_oracle.hpp"
#include "support.hpp"

using namespace fds;
using fds::test::uniform;

namespace {

std::vector<Vec2> random_points2(std::mt19937_64& rng, std::size_t n, double extent) {
  std::vector<Vec2> p(n);
  for (auto& v : p) v = Vec2(uniform(rng, 0, extent), uniform(rng, 0, extent));
  return p;
}

std::vector<Vec3> random_points3(std::mt19937_64& rng, std::size_t n, double extent) {
  std::vector<Vec3> p(n);
  for (auto& v : p) v = Vec3(uniform(rng, 0, extent), uniform(rng, 0, extent), uniform(rng, 0, extent));
  return p;
}

GaussianCloud cloud_at(const std::vector<Vec2>& pts, std::mt19937_64& rng) {
  GaussianCloud c;
  for (const auto& p : pts) {
    Gaussian2D g = test::random_gaussian(rng, 0, 1);
    g.mu = p;
    c.add(g);
  }
  return c;
}

}  // namespace

TEST_CASE("knn on three collinear points") {
  const std::vector<Vec2> pts{Vec2(0, 0), Vec2(1, 0), Vec2(3, 0)};
  const KnnResult r = knn(pts, 1);
  CHECK(r.ids == std::vector<std::size_t>{1, 0, 1});
  CHECK(r.dists == std::vector<double>{1, 1, 2});
}

TEST_CASE("knn on a grid interior point") {
  std::vector<Vec2> pts;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) pts.emplace_back(x, y);
  const KnnResult r = knn(pts, 4);
  const auto ids = r.ids_of(12);
  std::vector<std::size_t> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{7, 11, 13, 17});
  for (double d : r.dists_of(12)) CHECK(d == 1.0);
}

TEST_CASE("knn rejects K >= n") {
  const std::vector<Vec2> pts{Vec2(0, 0), Vec2(1, 0)};
  CHECK_THROWS_AS((void)knn(pts, 2), InvalidParameter);
  CHECK_THROWS_AS((void)knn(pts, 0), InvalidParameter);
}

TEST_CASE("knn matches brute force exactly") {
  std::mt19937_64 rng(17);
  const auto p2 = random_points2(rng, 1000, 10.0);
  const KnnResult r2 = knn(p2, 50);
  std::vector<std::size_t> ids;
  std::vector<double> dists;
  test::brute_knn<2>(p2, 50, ids, dists);
  CHECK(r2.ids == ids);
  CHECK(r2.dists == dists);

  const auto p3 = random_points3(rng, 1000, 10.0);
  test::brute_knn<3>(p3, 50, ids, dists);
  const KnnResult r3 = knn(p3, 50);
  CHECK(r3.ids == ids);
  CHECK(r3.dists == dists);
}

TEST_CASE("knn breaks distance ties by id, independent of insertion order") {
  // Integer lattice with many equal distances.
  std::vector<Vec2> pts;
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) pts.emplace_back(x, y);
  std::vector<std::size_t> ids;
  std::vector<double> dists;
  test::brute_knn<2>(pts, 9, ids, dists);
  const KnnResult r = knn(pts, 9);
  CHECK(r.ids == ids);

  std::mt19937_64 rng(5);
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec2> shuffled(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) shuffled[perm[i]] = pts[i];
  const KnnResult rs = knn(shuffled, 9);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto a = r.dists_of(i);
    const auto b = rs.dists_of(perm[i]);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("estimate_density closed cases") {
  const SceneScaleFactor scene{0.7};
  const std::vector<std::size_t> ids{1, 2, 3, 4};
  const std::vector<double> shell{2.5, 2.5, 2.5, 2.5};
  const DensityEstimate e = estimate_density(ids, shell, scene, 2);
  for (double w : e.weights) CHECK(w == 1.0);
  CHECK(e.r_tilde == 2.5);
  CHECK(e.density == doctest::Approx(4.0 / (kPi * 6.25)));

  const std::vector<std::size_t> one_id{9};
  const std::vector<double> one{1.3};
  const DensityEstimate s = estimate_density(one_id, one, scene, 3);
  CHECK(s.r_tilde == 1.3);
  CHECK(s.density == doctest::Approx(1.0 / (4.0 / 3.0 * kPi * 1.3 * 1.3 * 1.3)).epsilon(1e-14));

  CHECK(scale_from_density(DensityEstimate{2.0, 1.0, {}, {}, {}}, 1.2) == doctest::Approx(2.4));
  CHECK(scale_from_density(estimate_density(ids, std::vector<double>(4, 1.0), scene, 2), 1.2) ==
        doctest::Approx(1.2));
}

TEST_CASE("estimate_density invariants and oracle") {
  std::mt19937_64 rng(23);
  const auto pts = random_points3(rng, 400, 5.0);
  const KnnResult nn = knn(pts, 20);
  const SceneScaleFactor scene = scene_scale(nn);
  std::vector<double> nearest;
  for (std::size_t i = 0; i < pts.size(); ++i) nearest.push_back(nn.dists_of(i)[0]);
  CHECK(scene.median_nn == test::oracle_median(nearest));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const DensityEstimate e = estimate_density(nn.ids_of(i), nn.dists_of(i), scene, 3);
    CHECK(e.weights[0] == 1.0);
    for (double w : e.weights) {
      CHECK(w > 0.0);
      CHECK(w <= 1.0);
    }
    CHECK(e.r_tilde >= e.neighbor_dists.front());
    CHECK(e.r_tilde <= e.neighbor_dists.back());
    const double r = test::oracle_r_tilde(nn.dists_of(i), scene.median_nn);
    CHECK(e.r_tilde == doctest::Approx(r).epsilon(1e-12));
    CHECK(e.density == doctest::Approx(20.0 / (4.0 / 3.0 * kPi * r * r * r)).epsilon(1e-12));
  }
}

TEST_CASE("coincident points hit the R~ floor") {
  std::vector<Vec2> pts{Vec2(0, 0), Vec2(0, 0), Vec2(1, 0), Vec2(2, 0), Vec2(3, 0)};
  const DensityField f = density_field(pts, 1);
  CHECK(f.median_nn == 1.0);
  CHECK(f.r_tilde[0] == kRTildeFloor * 1.0);
  CHECK(std::isfinite(f.density[0]));

  // More than half coincident: median falls back to the positive distances.
  std::vector<Vec2> dup{Vec2(0, 0), Vec2(0, 0), Vec2(0, 0), Vec2(0, 0), Vec2(2, 0)};
  CHECK(density_field(dup, 1).median_nn == 2.0);
  std::vector<Vec2> same(4, Vec2(1, 1));
  CHECK_THROWS_AS((void)density_field(same, 2), NumericalError);
}

TEST_CASE("rescale_cloud postconditions") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianCloud c = cloud_at(random_points2(rng, 200, uniform(rng, 1, 50)), rng);
    const GaussianCloud before = c;
    const RescaleReport rep = rescale_cloud(c, 50, 1.2);
    CHECK(rep.k_eff == 50);
    REQUIRE(c.has_density());
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(std::abs(c[i].s_a - 1.2 * c.r_tilde()[i]) <= 1e-9);
      CHECK(c[i].s_r_raw == before[i].s_r_raw);
      CHECK(c[i].mu == before[i].mu);
      CHECK(c[i].rot == before[i].rot);
      CHECK(c[i].alpha_raw == before[i].alpha_raw);
      CHECK(c[i].color == before[i].color);
      CHECK(c[i].order_key == before[i].order_key);
    }
    // Fixed point.
    const GaussianCloud once = c;
    rescale_cloud(c, 50, 1.2);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i].s_a == once[i].s_a);
  }
}

TEST_CASE("rescale_cloud on a grid") {
  std::mt19937_64 rng(2);
  std::vector<Vec2> pts;
  const double h = 0.37;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) pts.emplace_back(x * h, y * h);
  GaussianCloud c = cloud_at(pts, rng);
  rescale_cloud(c, 4, 1.2);
  for (int y = 1; y < 8; ++y) {
    for (int x = 1; x < 8; ++x) {
      CHECK(c[static_cast<std::size_t>(y * 9 + x)].s_a == doctest::Approx(1.2 * h).epsilon(1e-12));
    }
  }
}

TEST_CASE("rescale_cloud clamps K on small clouds") {
  std::mt19937_64 rng(3);
  GaussianCloud c = cloud_at(random_points2(rng, 6, 3.0), rng);
  CHECK(rescale_cloud(c, 50, 1.2).k_eff == 5);
  GaussianCloud single = cloud_at(random_points2(rng, 1, 3.0), rng);
  CHECK_THROWS_AS(rescale_cloud(single, 50, 1.2), InvalidParameter);
}

TEST_CASE("density is scale equivariant and anti-monotone in spacing") {
  std::mt19937_64 rng(41);
  const auto pts = random_points2(rng, 300, 4.0);
  const DensityField base = density_field(pts, 50);
  for (double lambda : {0.01, 0.5, 3.0, 1000.0}) {
    std::vector<Vec2> scaled(pts);
    for (auto& p : scaled) p *= lambda;
    const DensityField f = density_field(scaled, 50);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(f.r_tilde[i] == doctest::Approx(lambda * base.r_tilde[i]).epsilon(1e-9));
    }
  }
  auto grid = [](double h) {
    std::vector<Vec2> g;
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 11; ++x) g.emplace_back(x * h, y * h);
    return g;
  };
  CHECK(density_field(grid(0.5), 8).density[60] > density_field(grid(0.8), 8).density[60]);
}
