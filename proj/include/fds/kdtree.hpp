#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace fds {

struct Neighbor {
  std::size_t id = 0;
  double dist_sq = 0.0;

  /// Ties on distance are broken by the lower id.
  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist_sq < b.dist_sq || (a.dist_sq == b.dist_sq && a.id < b.id);
  }
};

/// Exact k-nearest-neighbour index over a fixed point set.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  explicit KdTree(std::span<const Point> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) root_ = build(0, order_.size());
  }

  [[nodiscard]] std::size_t size() const { return points_.size(); }

  static double squared_distance(const Point& a, const Point& b) {
    double s = 0.0;
    for (int d = 0; d < Dim; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  }

  /// The k nearest points to `query`, ascending, skipping index `exclude`
  /// (pass size() to exclude nothing). `out` is overwritten.
  void query(const Point& query, std::size_t k, std::size_t exclude,
             std::vector<Neighbor>& out) const {
    out.clear();
    if (k == 0 || root_ < 0) return;
    search(root_, query, k, exclude, out);
    std::sort_heap(out.begin(), out.end());
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_
    int axis = -1;                   // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(std::size_t begin, std::size_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin > kLeafSize) {
      Point lo = points_[order_[begin]], hi = lo;
      for (std::size_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
      }
      int axis = 0;
      (hi - lo).maxCoeff(&axis);
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      const int self = static_cast<int>(nodes_.size());
      nodes_.push_back(node);
      const int left = build(begin, mid);
      const int right = build(mid, end);
      nodes_[static_cast<std::size_t>(self)].left = left;
      nodes_[static_cast<std::size_t>(self)].right = right;
      return self;
    }
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  // `heap` is a max-heap on (dist_sq, id) holding the best candidates so far.
  void search(int index, const Point& q, std::size_t k, std::size_t exclude,
              std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(index)];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t id = order_[i];
        if (id == exclude) continue;
        const Neighbor cand{id, squared_distance(points_[id], q)};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, exclude, heap);
    // Points exactly on the boundary distance may still win on id, hence <=.
    if (heap.size() < k || diff * diff <= heap.front().dist_sq) {
      search(far, q, k, exclude, heap);
    }
  }

  std::vector<Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace fds
