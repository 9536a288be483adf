#pragma once

// Exact nearest-neighbour queries for point sets in the complex plane.
//
// Points are sorted by real part; a query scans outwards from its position
// and stops once the real-part gap alone exceeds the current k-th best
// distance. Ties in distance are broken by the smaller original index, so
// results match an all-pairs scan exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "adm/common.hpp"

namespace adm::detail {

struct Neighbor {
  std::size_t index = static_cast<std::size_t>(-1);
  double distance = std::numeric_limits<double>::infinity();
};

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

class PlanarIndex {
 public:
  explicit PlanarIndex(std::span<const cplx> points) : pts_(points.begin(), points.end()) {
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return pts_[a].real() < pts_[b].real() || (pts_[a].real() == pts_[b].real() && a < b);
    });
    rank_.resize(pts_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) rank_[order_[i]] = i;
  }

  std::size_t size() const { return pts_.size(); }

  /// The K nearest points to pts_[self], excluding self, best first.
  template <std::size_t K>
  std::array<Neighbor, K> nearest_to_member(std::size_t self) const {
    return scan<K>(pts_[self], rank_[self], self);
  }

  /// Nearest point to an arbitrary query location.
  Neighbor nearest(cplx q) const {
    const auto it = std::lower_bound(order_.begin(), order_.end(), q.real(),
                                     [&](std::size_t a, double v) { return pts_[a].real() < v; });
    const auto start = static_cast<std::size_t>(it - order_.begin());
    return scan<1>(q, start, static_cast<std::size_t>(-1))[0];
  }

 private:
  template <std::size_t K>
  std::array<Neighbor, K> scan(cplx q, std::size_t start, std::size_t exclude) const {
    std::array<Neighbor, K> best{};
    auto offer = [&](std::size_t idx) {
      if (idx == exclude) return;
      Neighbor cand{idx, std::abs(pts_[idx] - q)};
      if (!neighbor_less(cand, best[K - 1])) return;
      best[K - 1] = cand;
      for (std::size_t j = K - 1; j > 0 && neighbor_less(best[j], best[j - 1]); --j)
        std::swap(best[j], best[j - 1]);
    };
    const std::size_t n = order_.size();
    // upward
    for (std::size_t i = start; i < n; ++i) {
      const std::size_t idx = order_[i];
      if (pts_[idx].real() - q.real() > best[K - 1].distance) break;
      offer(idx);
    }
    // downward
    for (std::size_t i = start; i-- > 0;) {
      const std::size_t idx = order_[i];
      if (q.real() - pts_[idx].real() > best[K - 1].distance) break;
      offer(idx);
    }
    return best;
  }

  std::vector<cplx> pts_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> rank_;
};

}  // namespace adm::detail
