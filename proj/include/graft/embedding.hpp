#pragma once

// Partition-of-unity layout of a tree in the unit cube, boundary-clamped
// binning, minimum injective resolution, fingerprints and Jaccard similarity.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "graft/reduction.hpp"

namespace graft {

struct Point {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Closed axis-aligned rectangle [x0, x1] x [y0, y1].
struct Rect {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  Point centroid() const { return {(x0 + x1) / 2, (y0 + y1) / 2, 0.0}; }

  bool contains(const Rect& o) const { return x0 <= o.x0 && o.x1 <= x1 && y0 <= o.y0 && o.y1 <= y1; }

  bool interior_contains(double x, double y) const { return x0 < x && x < x1 && y0 < y && y < y1; }

  bool interiors_overlap(const Rect& o) const {
    return std::max(x0, o.x0) < std::min(x1, o.x1) && std::max(y0, o.y0) < std::min(y1, o.y1);
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Embedding {
  std::string tree_version;
  std::map<NodeId, Point> position;
  std::map<NodeId, Rect> rect;
  std::map<NodeId, std::size_t> depth;
  std::size_t max_depth = 0;  // D

  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Recursive subdivision: every node sits at its rectangle's centroid;
/// c-children split the rectangle along y, s-children along x, in name
/// order. An odd group of n children uses n + 1 slots and leaves the middle
/// slot (index ceil(q/2)) empty.
inline Embedding layout(const FactoredTree& t, std::string tree_version = {}) {
  Embedding e;
  e.tree_version = std::move(tree_version);

  auto place = [&](auto& self, const NodeId& v, Rect r, std::size_t d) -> void {
    const Point c = r.centroid();
    e.position[v] = {c.x, c.y, static_cast<double>(d)};
    e.rect[v] = r;
    e.depth[v] = d;
    e.max_depth = std::max(e.max_depth, d);

    const auto& children = t.children_of(v);
    if (children.empty()) return;
    const EdgeType type = t.edge_type.at(children.front());
    for (const auto& ch : children)
      if (t.edge_type.at(ch) != type) throw Error("mixed children at " + v);

    const std::size_t n = children.size();
    const std::size_t q = n % 2 == 0 ? n : n + 1;
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < q; ++i)
      if (n % 2 == 0 || i != (q + 1) / 2) slots.push_back(i);

    for (std::size_t k = 0; k < n; ++k) {
      const double i = static_cast<double>(slots[k]);
      Rect sub = r;
      if (type == EdgeType::characterized_by) {
        const double h = (r.y1 - r.y0) / static_cast<double>(q);
        sub.y0 = r.y0 + i * h;
        sub.y1 = r.y0 + (i + 1) * h;
      } else {
        const double w = (r.x1 - r.x0) / static_cast<double>(q);
        sub.x0 = r.x0 + i * w;
        sub.x1 = r.x0 + (i + 1) * w;
      }
      self(self, children[k], sub, d + 1);
    }
  };
  place(place, t.root, Rect{}, 0);

  for (auto& [v, p] : e.position)
    p.z = e.max_depth == 0 ? 0.0 : p.z / static_cast<double>(e.max_depth);
  return e;
}

/// Grid cell (i, j, depth).
struct Cell {
  int i = 0, j = 0, d = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

inline Cell bin_point(const Point& p, std::size_t depth, int K) {
  const auto clamp = [K](double c) { return std::min(K - 1, static_cast<int>(std::floor(K * c))); };
  return {clamp(p.x), clamp(p.y), static_cast<int>(depth)};
}

/// Boundary-clamped bin map at resolution K.
inline std::map<NodeId, Cell> bin(const Embedding& e, int K) {
  if (K < 1) throw Error("resolution K must be positive");
  std::map<NodeId, Cell> out;
  for (const auto& [v, p] : e.position) out.emplace(v, bin_point(p, e.depth.at(v), K));
  return out;
}

inline constexpr int kMaxResolution = 4096;

inline bool bin_injective(const Embedding& e, int K) {
  std::unordered_set<long long> seen;
  seen.reserve(e.position.size() * 2);
  for (const auto& [v, p] : e.position) {
    const Cell c = bin_point(p, e.depth.at(v), K);
    const long long key = (static_cast<long long>(c.d) * kMaxResolution + c.j) * kMaxResolution + c.i;
    if (!seen.insert(key).second) return false;
  }
  return true;
}

/// Smallest K <= k_max at which binning separates every node.
inline int min_injective_K(const Embedding& e, int k_max = kMaxResolution) {
  for (int K = 1; K <= k_max; ++K)
    if (bin_injective(e, K)) return K;
  throw Error("no K <= " + std::to_string(k_max) + " separates all nodes");
}

enum class KeepPolicy { s_only, all_nodes };

inline std::string_view to_string(KeepPolicy k) { return k == KeepPolicy::s_only ? "s" : "all"; }

struct Fingerprint {
  std::string tree_tag;
  int K = 1;
  KeepPolicy keep = KeepPolicy::s_only;
  std::set<Cell> cells;

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

/// Cells of the kept path nodes. s_only keeps nodes entered by an s-edge.
inline Fingerprint fingerprint(const Embedding& e, const FactoredTree& t, const std::set<NodeId>& path_nodes,
                               int K, KeepPolicy keep = KeepPolicy::s_only) {
  if (K < 1) throw Error("resolution K must be positive");
  Fingerprint f{e.tree_version, K, keep, {}};
  for (const auto& v : path_nodes) {
    auto it = e.position.find(v);
    if (it == e.position.end()) throw Error("path node " + v + " is not in the tree");
    if (keep == KeepPolicy::s_only) {
      auto et = t.edge_type.find(v);
      if (et == t.edge_type.end() || et->second != EdgeType::subdivides_in) continue;
    }
    f.cells.insert(bin_point(it->second, e.depth.at(v), K));
  }
  if (f.cells.empty()) throw Error("fingerprint has no kept nodes");
  return f;
}

/// Every node of `path` plus its ancestors.
inline std::set<NodeId> ancestor_closure(const FactoredTree& t, const std::set<NodeId>& path) {
  std::set<NodeId> out;
  for (const auto& v : path) {
    if (!t.contains(v)) throw Error("path node " + v + " is not in the tree");
    for (std::optional<NodeId> cur = v; cur && out.insert(*cur).second; cur = t.parent_of(*cur)) {
    }
  }
  return out;
}

inline void check_comparable(const Fingerprint& a, const Fingerprint& b) {
  if (a.tree_tag != b.tree_tag) throw VersionError("fingerprints from different trees: " + a.tree_tag + " vs " + b.tree_tag);
  if (a.K != b.K) throw Error("fingerprints at different resolutions");
  if (a.keep != b.keep) throw Error("fingerprints with different keep policies");
  if (a.cells.empty() || b.cells.empty()) throw Error("empty fingerprint");
}

/// (|a & b|, |a | b|).
inline std::pair<std::size_t, std::size_t> jaccard_counts(const Fingerprint& a, const Fingerprint& b) {
  check_comparable(a, b);
  std::size_t inter = 0;
  auto i = a.cells.begin();
  auto j = b.cells.begin();
  while (i != a.cells.end() && j != b.cells.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  return {inter, a.cells.size() + b.cells.size() - inter};
}

inline double jaccard(const Fingerprint& a, const Fingerprint& b) {
  const auto [inter, uni] = jaccard_counts(a, b);
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace graft
