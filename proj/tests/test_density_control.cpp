#include <doctest.h>

#include "fds/density_control.hpp"
#include "support.hpp"

#include <algorithm>

using namespace fds;
using fds::test::uniform;

namespace {

// k-th largest value with k = ceil(n / 4): the exact top-quarter cutoff.
double exact_top_quarter(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::ceil(0.25 * static_cast<double>(v.size())));
  return v[k - 1];
}

GaussianCloud small_cloud(std::mt19937_64& rng, int n) {
  GaussianCloud c;
  for (int i = 0; i < n; ++i) {
    Gaussian2D g = test::random_gaussian(rng, 0, 100);
    g.s_a = 0.2;
    c.add(g);
  }
  return c;
}

}  // namespace

TEST_CASE("dynamic_threshold degenerate populations") {
  const std::vector<double> same(40, 0.003);
  const ThresholdStats s = dynamic_threshold(same, 0.0005);
  CHECK(s.grad_25 == 0.003);
  CHECK(s.tau_pos == 0.003);
  CHECK(s.grad_min <= s.grad_mean);

  const std::vector<double> zeros(10, 0.0);
  const ThresholdStats z = dynamic_threshold(zeros, 0.0005);
  CHECK(z.grad_25 == 0.0);
  CHECK(z.tau_pos == 0.0005);

  CHECK_THROWS_AS((void)dynamic_threshold(std::vector<double>{}, 0.0005), InvalidParameter);
  CHECK_THROWS_AS((void)dynamic_threshold(std::vector<double>{1.0, -1.0}, 0.0005),
                  InvalidParameter);
}

TEST_CASE("dynamic_threshold on a uniform population") {
  std::mt19937_64 rng(1);
  std::vector<double> g(100000);
  for (double& v : g) v = uniform(rng, 0.0, 1.0);
  const ThresholdStats s = dynamic_threshold(g, 0.0005);
  CHECK(s.histogram.size() == 256);
  CHECK(std::abs(s.grad_25 - exact_top_quarter(g)) <= s.bin_width);
  CHECK(std::abs(s.grad_25 - 0.75) <= s.bin_width + 0.01);
  CHECK(s.tau_pos == s.grad_25);
}

TEST_CASE("histogram quantile agrees with a sort on skewed populations") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(uniform(rng, 10, 3000));
    std::vector<double> g(n);
    const int kind = trial % 3;
    std::exponential_distribution<double> expo(uniform(rng, 10, 5000));
    std::lognormal_distribution<double> logn(uniform(rng, -9, -4), uniform(rng, 0.2, 1.0));
    for (double& v : g) {
      v = kind == 0 ? uniform(rng, 0, 1e-3) : kind == 1 ? expo(rng) : logn(rng);
    }
    const ThresholdStats s = dynamic_threshold(g, 0.0005);
    CHECK(std::abs(s.grad_25 - exact_top_quarter(g)) <= s.bin_width);

    const double lambda = uniform(rng, 0.1, 10.0);
    std::vector<double> scaled(g);
    for (double& v : scaled) v *= lambda;
    const ThresholdStats t = dynamic_threshold(scaled, 0.0005);
    CHECK(std::abs(t.grad_25 - lambda * s.grad_25) <= t.bin_width);
  }
}

TEST_CASE("tau_pos never drops below the preset") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20000; ++trial) {
    std::vector<double> g(static_cast<std::size_t>(uniform(rng, 1, 30)));
    for (double& v : g) v = uniform(rng, 0, 1e-3) * (uniform(rng, 0, 1) < 0.3 ? 0.0 : 1.0);
    const ThresholdStats s = dynamic_threshold(g, 0.0005);
    CHECK(s.tau_pos >= 0.0005);
    CHECK(s.grad_min <= s.grad_mean);
  }
}

TEST_CASE("densify with nothing above threshold is a no-op") {
  std::mt19937_64 rng(4);
  GaussianCloud c = small_cloud(rng, 20);
  const GaussianCloud before = c;
  GradAccumulator acc(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) acc.add(i, 1e-5);
  ThresholdStats st;
  st.tau_pos = 1e-3;
  const DensifyReport r = densify(c, st, acc, 100.0, rng);
  CHECK(r.cloned + r.split == 0);
  REQUIRE(c.size() == before.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c[i].mu == before[i].mu);
    CHECK(c[i].s_a == before[i].s_a);
  }
}

TEST_CASE("densify clones small and splits large Gaussians") {
  std::mt19937_64 rng(5);
  GaussianCloud c = small_cloud(rng, 10);
  c[3].s_a = 0.5;  // max world scale < 0.01 * 100
  c[7].s_a = 30.0;
  const GaussianCloud before = c;
  GradAccumulator acc(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) acc.add(i, (i == 3 || i == 7) ? 1.0 : 0.0);
  ThresholdStats st;
  st.tau_pos = 0.5;
  const DensifyReport r = densify(c, st, acc, 100.0, rng);
  CHECK(r.cloned == 1);
  CHECK(r.split == 1);
  CHECK(c.size() == 12);  // +1 clone, -1 parent, +2 children
  CHECK(acc.size() == 12);
  CHECK(acc.count(0) == 0);

  // Untouched Gaussians keep their relative order and every field bitwise.
  std::size_t j = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (i == 7) continue;
    CHECK(r.origin[j] == static_cast<std::ptrdiff_t>(i));
    CHECK(c[j].mu == before[i].mu);
    CHECK(c[j].s_r_raw == before[i].s_r_raw);
    CHECK(c[j].color == before[i].color);
    CHECK(c[j].order_key == before[i].order_key);
    ++j;
  }
  // First child keeps the parent's key; then the clone and second child.
  CHECK(c[9].order_key == before[7].order_key);
  CHECK(c[9].s_a == 30.0 / 1.6);
  CHECK(c[9].s_r_raw == before[7].s_r_raw);
  CHECK(c[9].alpha_raw == before[7].alpha_raw);
  CHECK(c[10].order_key == 10);
  CHECK(c[11].order_key == 11);
  CHECK(c[11].s_a == 30.0 / 1.6);
  std::vector<std::uint64_t> keys;
  for (const auto& g : c.gaussians()) keys.push_back(g.order_key);
  std::sort(keys.begin(), keys.end());
  CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
}

TEST_CASE("clone is an exact duplicate with a new key") {
  std::mt19937_64 rng(6);
  GaussianCloud c = small_cloud(rng, 3);
  const Gaussian2D src = c[1];
  GradAccumulator acc(3);
  acc.add(1, 1.0);
  ThresholdStats st;
  st.tau_pos = 0.1;
  densify(c, st, acc, 1000.0, rng);
  REQUIRE(c.size() == 4);
  CHECK(c[3].mu == src.mu);
  CHECK(c[3].rot == src.rot);
  CHECK(c[3].s_a == src.s_a);
  CHECK(c[3].alpha_raw == src.alpha_raw);
  CHECK(c[3].order_key == 3);
}

TEST_CASE("split children follow the parent distribution") {
  std::mt19937_64 rng(7);
  Gaussian2D parent;
  parent.mu = Vec2(10, -4);
  parent.rot = 0.6;
  parent.s_a = 8.0;
  parent.s_r_raw = Vec2(1.0, -1.0);
  const Mat2 sigma = covariance_of(parent);
  const int draws = 10000;
  Vec2 sum = Vec2::Zero();
  Mat2 outer = Mat2::Zero();
  int count = 0;
  for (int i = 0; i < draws / 2; ++i) {
    GaussianCloud c;
    c.add(parent);
    GradAccumulator acc(1);
    acc.add(0, 1.0);
    ThresholdStats st;
    st.tau_pos = 0.1;
    densify(c, st, acc, 10.0, rng);
    REQUIRE(c.size() == 2);
    for (const auto& g : c.gaussians()) {
      sum += g.mu;
      outer += (g.mu - parent.mu) * (g.mu - parent.mu).transpose();
      ++count;
    }
  }
  const Vec2 mean = sum / count;
  for (int a = 0; a < 2; ++a) {
    const double se = std::sqrt(sigma(a, a) / count);
    CHECK(std::abs(mean[a] - parent.mu[a]) < 3.0 * se);
  }
  const Mat2 cov = outer / count;
  CHECK((cov - sigma).norm() < 0.1 * sigma.norm());
}

TEST_CASE("opacity maintenance") {
  GaussianCloud c;
  Gaussian2D g;
  g.alpha_raw = logit(0.001);
  c.add(g);
  g.alpha_raw = logit(0.9);
  c.add(g);
  GaussianCloud d = c;

  MaintenanceReport r = opacity_maintenance(c, 100);
  CHECK(r.pruned == 1);
  CHECK_FALSE(r.reset);
  REQUIRE(c.size() == 1);
  CHECK(c[0].alpha() == doctest::Approx(0.9).epsilon(1e-14));

  const GaussianCloud same = c;
  CHECK(opacity_maintenance(c, 101).pruned == 0);
  CHECK(c[0].alpha_raw == same[0].alpha_raw);

  r = opacity_maintenance(d, 3000);
  CHECK(r.reset);
  REQUIRE(d.size() == 1);
  CHECK(std::abs(d[0].alpha() - 0.01) < 1e-15);
  CHECK(r.origin == Origin{1});

  CHECK_FALSE(opacity_maintenance(d, 0).reset);
}

TEST_CASE("large-Gaussian pruning and origin remapping") {
  GaussianCloud c;
  Gaussian2D g;
  g.s_a = 2.0;
  c.add(g);
  g.s_a = 40.0;
  c.add(g);
  g.s_a = 3.0;
  c.add(g);
  const MaintenanceReport r = prune_large(c, 100.0);
  CHECK(r.pruned == 1);
  CHECK(r.origin == Origin{0, 2});
  const std::vector<int> state{10, 11, 12};
  CHECK(remap(state, Origin{2, -1, 0}, -5) == std::vector<int>{12, -5, 10});
}
