#pragma once

// Shared fixtures for the unit and acceptance tests.

#include "fds/cloud.hpp"
#include "fds/render.hpp"

#include <cmath>
#include <random>

namespace fds::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Gaussian2D random_gaussian(std::mt19937_64& rng, double lo, double hi) {
  Gaussian2D g;
  g.mu = Vec2(uniform(rng, lo, hi), uniform(rng, lo, hi));
  g.rot = uniform(rng, -kPi, kPi);
  g.s_a = uniform(rng, 1.0, 3.5);
  g.s_r_raw = Vec2(uniform(rng, -1.0, 1.5), uniform(rng, -1.0, 1.5));
  g.alpha_raw = uniform(rng, -1.5, 2.0);
  g.color = Vec3(uniform(rng, 0, 255), uniform(rng, 0, 255), uniform(rng, 0, 255));
  return g;
}

inline AffineView random_view(std::mt19937_64& rng) {
  AffineView v;
  const double r = uniform(rng, -0.3, 0.3), z = uniform(rng, 0.85, 1.15);
  v.linear << z * std::cos(r), -z * std::sin(r), z * std::sin(r), z * std::cos(r);
  v.linear(0, 1) += uniform(rng, -0.1, 0.1);
  v.translation = Vec2(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
  return v;
}

inline RasterImage random_image(std::mt19937_64& rng, int w, int h) {
  RasterImage img(w, h);
  for (double& v : img.data()) v = uniform(rng, 0.0, 255.0);
  return img;
}

/// Distance from the nearest integer.
inline double integer_gap(double v) { return std::abs(v - std::round(v)); }

/// True when no projected footprint edge sits near a pixel boundary, so that
/// small parameter perturbations cannot change which pixels a Gaussian covers.
inline bool footprints_stable(const GaussianCloud& cloud, const AffineView& view, double margin) {
  for (const auto& g : cloud.gaussians()) {
    const Projected2D p = project(g, view);
    const double rx = kFootprintSigmas * std::sqrt(p.sigma_p(0, 0));
    const double ry = kFootprintSigmas * std::sqrt(p.sigma_p(1, 1));
    for (double e : {p.mu_p.x() - rx, p.mu_p.x() + rx, p.mu_p.y() - ry, p.mu_p.y() + ry}) {
      if (integer_gap(e) < margin) return false;
    }
  }
  return true;
}

/// Number of scalar parameters per Gaussian in the flattened layout below.
inline constexpr int kParamsPerGaussian = 10;

/// mu.x, mu.y, rot, s_a, s_r_raw.x, s_r_raw.y, alpha_raw, r, g, b
inline double& param(Gaussian2D& g, int k) {
  switch (k) {
    case 0: return g.mu.x();
    case 1: return g.mu.y();
    case 2: return g.rot;
    case 3: return g.s_a;
    case 4: return g.s_r_raw.x();
    case 5: return g.s_r_raw.y();
    case 6: return g.alpha_raw;
    case 7: return g.color.x();
    case 8: return g.color.y();
    default: return g.color.z();
  }
}

inline double grad_component(const GaussianGrad& d, int k) {
  switch (k) {
    case 0: return d.mu.x();
    case 1: return d.mu.y();
    case 2: return d.rot;
    case 3: return d.s_a;
    case 4: return d.s_r_raw.x();
    case 5: return d.s_r_raw.y();
    case 6: return d.alpha_raw;
    case 7: return d.color.x();
    case 8: return d.color.y();
    default: return d.color.z();
  }
}

/// |a - b| <= max(rel * max(|a|, |b|), abs)
inline bool close(double a, double b, double rel, double abs) {
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs);
}

}  // namespace fds::test
