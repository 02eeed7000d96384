#include "fds/density.hpp"

#include "fds/kdtree.hpp"
#include "fds/log.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fds {

namespace {

template <int Dim>
KnnResult knn_impl(std::span<const Eigen::Matrix<double, Dim, 1>> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0) throw InvalidParameter("knn: K must be positive");
  if (n <= k) {
    throw InvalidParameter("knn: need more than K=" + std::to_string(k) + " points, got " +
                           std::to_string(n) + "; clamp K to n - 1");
  }
  const KdTree<Dim> tree(points);
  KnnResult out;
  out.k = k;
  out.ids.resize(n * k);
  out.dists.resize(n * k);
#pragma omp parallel
  {
    std::vector<Neighbor> found;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      tree.query(points[ui], k, ui, found);
      for (std::size_t j = 0; j < k; ++j) {
        out.ids[ui * k + j] = found[j].id;
        out.dists[ui * k + j] = std::sqrt(found[j].dist_sq);
      }
    }
  }
  return out;
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double r_tilde_of(std::span<const double> dists, double median_nn, std::vector<double>* weights) {
  const double d1 = dists[0];
  double num = 0.0, den = 0.0;
  for (double d : dists) {
    const double z = (d - d1) / median_nn;
    const double w = std::exp(-z * z);
    if (weights != nullptr) weights->push_back(w);
    num += w * d;
    den += w;
  }
  return std::max(num / den, kRTildeFloor * median_nn);
}

double density_of(double r_tilde, std::size_t k, int dim) {
  const double kk = static_cast<double>(k);
  return dim == 2 ? kk / (kPi * r_tilde * r_tilde)
                  : kk / (4.0 / 3.0 * kPi * r_tilde * r_tilde * r_tilde);
}

template <int Dim>
DensityField field_impl(std::span<const Eigen::Matrix<double, Dim, 1>> points, std::size_t k) {
  const std::size_t n = points.size();
  if (n < 2) throw InvalidParameter("density: need at least two points");
  DensityField out;
  out.k_eff = std::min(k, n - 1);
  if (out.k_eff != k) {
    log_warning("density: K=" + std::to_string(k) + " clamped to " + std::to_string(out.k_eff) +
                " for a cloud of " + std::to_string(n));
  }
  const KnnResult nn = knn_impl<Dim>(points, out.k_eff);
  out.median_nn = scene_scale(nn).median_nn;
  out.r_tilde.resize(n);
  out.density.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.r_tilde[i] = r_tilde_of(nn.dists_of(i), out.median_nn, nullptr);
    out.density[i] = density_of(out.r_tilde[i], out.k_eff, Dim);
  }
  return out;
}

}  // namespace

KnnResult knn(std::span<const Vec2> points, std::size_t k) { return knn_impl<2>(points, k); }
KnnResult knn(std::span<const Vec3> points, std::size_t k) { return knn_impl<3>(points, k); }

SceneScaleFactor scene_scale(const KnnResult& neighbors) {
  const std::size_t n = neighbors.point_count();
  if (n == 0) throw InvalidParameter("scene_scale: empty neighbour table");
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = neighbors.dists_of(i)[0];
  double median = median_of(nearest);
  if (median > 0.0) return {median};
  std::vector<double> positive;
  for (double d : nearest) {
    if (d > 0.0) positive.push_back(d);
  }
  if (positive.empty()) throw NumericalError("scene_scale: all points coincide");
  log_warning("scene_scale: median nearest-neighbour distance is 0, using positive distances");
  return {median_of(std::move(positive))};
}

DensityEstimate estimate_density(std::span<const std::size_t> neighbor_ids,
                                 std::span<const double> neighbor_dists,
                                 const SceneScaleFactor& scene, int dim) {
  if (neighbor_dists.empty() || neighbor_ids.size() != neighbor_dists.size()) {
    throw InvalidParameter("estimate_density: need K >= 1 matching ids and distances");
  }
  if (!(scene.median_nn > 0.0)) throw InvalidParameter("estimate_density: median_nn must be > 0");
  if (dim != 2 && dim != 3) throw InvalidParameter("estimate_density: dim must be 2 or 3");
  DensityEstimate est;
  est.neighbor_ids.assign(neighbor_ids.begin(), neighbor_ids.end());
  est.neighbor_dists.assign(neighbor_dists.begin(), neighbor_dists.end());
  est.weights.reserve(neighbor_dists.size());
  est.r_tilde = r_tilde_of(neighbor_dists, scene.median_nn, &est.weights);
  est.density = density_of(est.r_tilde, neighbor_dists.size(), dim);
  return est;
}

double scale_from_density(const DensityEstimate& est, double theta) { return theta * est.r_tilde; }

DensityField density_field(std::span<const Vec2> points, std::size_t k) {
  return field_impl<2>(points, k);
}
DensityField density_field(std::span<const Vec3> points, std::size_t k) {
  return field_impl<3>(points, k);
}

RescaleReport rescale_cloud(GaussianCloud& cloud, std::size_t k, double theta) {
  if (!(theta > 0.0)) throw InvalidParameter("rescale_cloud: theta must be > 0");
  const std::vector<Vec2> pos = cloud.positions();
  DensityField field = density_field(pos, k);
  for (std::size_t i = 0; i < cloud.size(); ++i) cloud[i].s_a = theta * field.r_tilde[i];
  const RescaleReport report{field.k_eff, field.median_nn};
  cloud.set_density(std::move(field.r_tilde), std::move(field.density));
  return report;
}

}  // namespace fds
