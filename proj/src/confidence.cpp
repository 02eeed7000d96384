#include "fds/confidence.hpp"

#include "fds/log.hpp"
#include "fds/parallel.hpp"
#include "fds/render.hpp"
#include "fds/ssim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace fds {

const SamplePattern& SamplePattern::standard() {
  static const SamplePattern p = [] {
    const double h = std::sqrt(2.0) / 2.0;
    SamplePattern out;
    out.directions = {Vec2(h, h),  Vec2(h, -h), Vec2(-h, h), Vec2(-h, -h),
                      Vec2(1, 0),  Vec2(-1, 0), Vec2(0, 1),  Vec2(0, -1)};
    out.radii = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    return out;
  }();
  return p;
}

ViewSamples sample_footprint(const Projected2D& p, const SamplePattern& pattern) {
  ViewSamples s;
  std::size_t k = 0;
  for (double r : pattern.radii) {
    for (const Vec2& d : pattern.directions) {
      // Row vector d times Sigma'.
      const Vec2 offset = r * (d.transpose() * p.sigma_p).transpose();
      s.points[k++] = p.mu_p + offset;
    }
  }
  s.points[k] = p.mu_p;
  for (std::size_t i = 0; i < s.points.size(); ++i) s.weights[i] = eval_gaussian(p, s.points[i]);
  return s;
}

double view_contribution(const Gaussian2D& g, const ViewSpec& view) {
  const Projected2D p = project(g, view.camera);
  const Footprint box = footprint(p, view.gt.width(), view.gt.height());
  if (box.empty()) return 0.0;
  const double alpha = g.alpha();
  if (alpha == 0.0) return 0.0;
  double sum = 0.0;
  for (int y = box.y0; y <= box.y1; ++y) {
    for (int x = box.x0; x <= box.x1; ++x) sum += alpha * eval_gaussian(p, Vec2(x, y));
  }
  return sum;
}

std::vector<std::size_t> top_m_views(std::span<const double> contributions, std::size_t m) {
  // "Better" means larger contribution, then lower index. The heap keeps the
  // worst of the current best m at its front.
  auto better = [&](std::size_t a, std::size_t b) {
    return contributions[a] > contributions[b] || (contributions[a] == contributions[b] && a < b);
  };
  std::vector<std::size_t> heap;
  heap.reserve(m + 1);
  for (std::size_t i = 0; i < contributions.size() && m > 0; ++i) {
    if (heap.size() < m) {
      heap.push_back(i);
      std::push_heap(heap.begin(), heap.end(), better);
    } else if (better(i, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), better);
      heap.back() = i;
      std::push_heap(heap.begin(), heap.end(), better);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), better);
  return heap;
}

double weighted_ssim(const ViewSamples& s1, const ViewSamples& si, const RasterImage& img1,
                     const RasterImage& img_i) {
  double w1 = 0.0, wi = 0.0;
  for (int k = 0; k < kSamplePoints; ++k) {
    w1 += s1.weights[k];
    wi += si.weights[k];
  }
  if (!(w1 > 0.0) || !(wi > 0.0)) throw NumericalError("weighted_ssim: all sample weights are 0");

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double m1 = 0, mi = 0, e11 = 0, eii = 0, e1i = 0;
    for (int k = 0; k < kSamplePoints; ++k) {
      const double a = img1.sample(s1.points[k].x(), s1.points[k].y(), c);
      const double b = img_i.sample(si.points[k].x(), si.points[k].y(), c);
      m1 += s1.weights[k] * a;
      e11 += s1.weights[k] * a * a;
      mi += si.weights[k] * b;
      eii += si.weights[k] * b * b;
      e1i += s1.weights[k] * a * b;
    }
    m1 /= w1;
    mi /= wi;
    const double var1 = std::max(e11 / w1 - m1 * m1, 0.0);
    const double vari = std::max(eii / wi - mi * mi, 0.0);
    const double cov = e1i / w1 - m1 * mi;
    total += (2.0 * m1 * mi + kSsimC1) * (2.0 * cov + kSsimC2) /
             ((m1 * m1 + mi * mi + kSsimC1) * (var1 + vari + kSsimC2));
  }
  return total / 3.0;
}

std::optional<ConfidenceScore> confidence(const Gaussian2D& g, std::span<const ViewSpec> views,
                                          std::size_t m) {
  if (m < 2) throw InvalidParameter("confidence: M must be at least 2");
  if (m > views.size()) {
    log_warning("confidence: M=" + std::to_string(m) + " clamped to " +
                std::to_string(views.size()) + " views");
    m = views.size();
  }
  std::vector<double> contrib(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) contrib[v] = view_contribution(g, views[v]);
  std::vector<std::size_t> top = top_m_views(contrib, m);
  while (!top.empty() && !(contrib[top.back()] > 0.0)) top.pop_back();
  if (top.size() < 2) return std::nullopt;

  const ViewSpec& ref = views[top[0]];
  const ViewSamples s1 = sample_footprint(project(g, ref.camera));
  ConfidenceScore score;
  score.views.push_back(ref.id);
  double sum = 0.0;
  for (std::size_t i = 1; i < top.size(); ++i) {
    const ViewSpec& v = views[top[i]];
    sum += weighted_ssim(s1, sample_footprint(project(g, v.camera)), ref.gt, v.gt);
    score.views.push_back(v.id);
  }
  score.value = sum / static_cast<double>(top.size() - 1);
  return score;
}

FilterReport apply_filter(GaussianCloud& cloud, std::span<const ViewSpec> views, std::size_t m,
                          double tau_c) {
  if (m < 2) throw InvalidParameter("apply_filter: M must be at least 2");
  if (m > views.size()) {
    log_warning("apply_filter: M=" + std::to_string(m) + " clamped to " +
                std::to_string(views.size()) + " views");
    m = views.size();
  }
  FilterReport rep;
  const std::size_t n = cloud.size();
  rep.scores.resize(n);
  if (m >= 2) {
    configure_threads();
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      rep.scores[ui] = confidence(cloud[ui], views, m);
    }
  }
  std::vector<bool> remove(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rep.scores[i]) {
      ++rep.unscorable;
    } else if (rep.scores[i]->value < tau_c) {
      remove[i] = true;
    }
  }
  rep.origin = origin_after_removal(remove);
  rep.removed = cloud.remove_if(remove);
  return rep;
}

void write_confidence_csv(const std::vector<std::optional<ConfidenceScore>>& scores,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "id,score,reference_view\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << i << ',';
    if (scores[i]) out << scores[i]->value << ',' << scores[i]->views.front();
    else out << ',';
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fds
