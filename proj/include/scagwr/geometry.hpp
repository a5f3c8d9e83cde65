#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scagwr/error.hpp"
#include "scagwr/kernel_family.hpp"
#include "scagwr/parallel.hpp"

namespace scagwr {

using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Planar sample locations, one row per site.
class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(Coords coords) : coords_(std::move(coords)) {
    if (coords_.rows() < 2) {
      throw ValidationError("site set needs at least 2 sites, got " +
                            std::to_string(coords_.rows()));
    }
    for (Eigen::Index i = 0; i < coords_.rows(); ++i) {
      if (!std::isfinite(coords_(i, 0)) || !std::isfinite(coords_(i, 1))) {
        throw ValidationError("non-finite coordinate at site " + std::to_string(i));
      }
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(coords_.rows()); }
  const Coords& coords() const { return coords_; }
  double x(std::size_t i) const { return coords_(static_cast<Eigen::Index>(i), 0); }
  double y(std::size_t i) const { return coords_(static_cast<Eigen::Index>(i), 1); }

  double squared_distance(std::size_t i, std::size_t j) const {
    double dx = x(i) - x(j);
    double dy = y(i) - y(j);
    return dx * dx + dy * dy;
  }
  double distance(std::size_t i, std::size_t j) const {
    return std::sqrt(squared_distance(i, j));
  }

 private:
  Coords coords_;
};

/// Per-site Q nearest neighbors (self excluded), ascending by distance with
/// ties broken by lower site index.
class NeighborGraph {
 public:
  NeighborGraph(std::size_t sites, std::size_t q)
      : sites_(sites), q_(q), index_(sites * q), dist_(sites * q) {}

  std::size_t sites() const { return sites_; }
  std::size_t q() const { return q_; }

  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {index_.data() + i * q_, q_};
  }
  std::span<const double> distances(std::size_t i) const {
    return {dist_.data() + i * q_, q_};
  }
  /// D_i^(Q): distance from site i to its Q-th nearest neighbor.
  double kth_distance(std::size_t i) const { return dist_[i * q_ + q_ - 1]; }

  std::span<std::uint32_t> mutable_neighbors(std::size_t i) {
    return {index_.data() + i * q_, q_};
  }
  std::span<double> mutable_distances(std::size_t i) {
    return {dist_.data() + i * q_, q_};
  }

 private:
  std::size_t sites_;
  std::size_t q_;
  std::vector<std::uint32_t> index_;
  std::vector<double> dist_;
};

namespace detail {

// Static 2-d tree with bucket leaves. Queries are exact: candidates are
// ordered by (squared distance, index) and a subtree is only skipped when its
// bounding box is strictly farther than the current Q-th candidate.
class KdTree {
 public:
  explicit KdTree(const SiteSet& sites) : sites_(sites), order_(sites.size()) {
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * sites.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(order_.size()));
  }

  void knn(std::size_t query, std::size_t q, std::span<std::uint32_t> out_index,
           std::span<double> out_dist) const {
    Heap heap;
    search(0, query, q, heap);
    for (std::size_t r = q; r-- > 0;) {
      out_index[r] = heap.top().second;
      out_dist[r] = std::sqrt(heap.top().first);
      heap.pop();
    }
  }

 private:
  static constexpr std::uint32_t kLeafSize = 16;
  using Candidate = std::pair<double, std::uint32_t>;
  // Max-heap on (d2, index): top is the current worst kept candidate.
  using Heap = std::priority_queue<Candidate>;

  struct Node {
    double lo[2];
    double hi[2];
    std::uint32_t begin, end;
    std::int32_t left = -1, right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    Node node{};
    node.begin = begin;
    node.end = end;
    node.lo[0] = node.lo[1] = INFINITY;
    node.hi[0] = node.hi[1] = -INFINITY;
    for (std::uint32_t k = begin; k < end; ++k) {
      std::size_t s = order_[k];
      node.lo[0] = std::min(node.lo[0], sites_.x(s));
      node.hi[0] = std::max(node.hi[0], sites_.x(s));
      node.lo[1] = std::min(node.lo[1], sites_.y(s));
      node.hi[1] = std::max(node.hi[1], sites_.y(s));
    }
    auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) return id;

    int axis = (node.hi[0] - node.lo[0]) >= (node.hi[1] - node.lo[1]) ? 0 : 1;
    std::uint32_t mid = begin + (end - begin) / 2;
    auto coord = [&](std::uint32_t s) { return axis == 0 ? sites_.x(s) : sites_.y(s); };
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return coord(a) < coord(b); });
    std::int32_t left = build(begin, mid);
    std::int32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  double box_d2(const Node& n, std::size_t query) const {
    double px = sites_.x(query), py = sites_.y(query);
    double dx = px < n.lo[0] ? n.lo[0] - px : (px > n.hi[0] ? px - n.hi[0] : 0.0);
    double dy = py < n.lo[1] ? n.lo[1] - py : (py > n.hi[1] ? py - n.hi[1] : 0.0);
    return dx * dx + dy * dy;
  }

  void search(std::int32_t id, std::size_t query, std::size_t q, Heap& heap) const {
    const Node& n = nodes_[id];
    if (heap.size() == q && box_d2(n, query) > heap.top().first) return;
    if (n.left < 0) {
      for (std::uint32_t k = n.begin; k < n.end; ++k) {
        std::uint32_t s = order_[k];
        if (s == query) continue;
        Candidate c{sites_.squared_distance(query, s), s};
        if (heap.size() < q) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    std::int32_t first = n.left, second = n.right;
    if (box_d2(nodes_[second], query) < box_d2(nodes_[first], query)) std::swap(first, second);
    search(first, query, q, heap);
    search(second, query, q, heap);
  }

  const SiteSet& sites_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace detail

/// Exact Q-nearest-neighbor graph under Euclidean distance.
inline NeighborGraph build_neighbor_graph(const SiteSet& sites, std::size_t q,
                                          unsigned threads = 1) {
  const std::size_t n = sites.size();
  if (q < 1 || q >= n) {
    throw ValidationError("neighbor count Q=" + std::to_string(q) + " must satisfy 1 <= Q <= N-1 (N=" +
                          std::to_string(n) + "); lower Q");
  }
  NeighborGraph graph(n, q);
  detail::KdTree tree(sites);
  parallel_for(n, threads, [&](std::size_t i) {
    tree.knn(i, q, graph.mutable_neighbors(i), graph.mutable_distances(i));
  });
  return graph;
}

/// Median with the even-count convention (mean of the two central values).
inline double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

/// Base bandwidth h0 from per-site Q-th neighbor distances: the median
/// D_med^(Q) is matched to the effective bandwidth, sqrt(3)*h0 for the
/// gaussian kernel and 3*h0 for the exponential kernel.
inline double base_bandwidth(std::span<const double> kth_distances, KernelFamily family) {
  double med = median(std::vector<double>(kth_distances.begin(), kth_distances.end()));
  double h0 = family == KernelFamily::gaussian ? med / std::sqrt(3.0) : med / 3.0;
  if (!(h0 > 0.0)) {
    throw ValidationError("median Q-th neighbor distance is zero; base bandwidth undefined "
                          "(too many duplicate coordinates for this Q)");
  }
  return h0;
}

inline double base_bandwidth(const NeighborGraph& graph, KernelFamily family) {
  std::vector<double> d(graph.sites());
  for (std::size_t i = 0; i < graph.sites(); ++i) d[i] = graph.kth_distance(i);
  return base_bandwidth(d, family);
}

}  // namespace scagwr
