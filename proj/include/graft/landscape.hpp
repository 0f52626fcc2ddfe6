#pragma once

// One principal-component coordinate per tree for every repository entry,
// paired with an observable: the data behind a problem/method landscape plot.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "graft/memory.hpp"

namespace graft {

inline constexpr int kLandscapeResolution = 32;

struct PrincipalAxis {
  std::vector<double> loading;      // unit vector, empty when degenerate
  std::vector<double> coordinates;  // projection of each centred row
  bool degenerate = false;
  std::size_t iterations = 0;
};

/// First principal component of the rows of `x` by power iteration on the
/// covariance, started from the all-ones vector. The sign makes the
/// largest-magnitude loading positive.
inline PrincipalAxis first_principal_axis(std::vector<std::vector<double>> x, double tol = 1e-9,
                                          std::size_t max_iter = 200) {
  PrincipalAxis out;
  const std::size_t n = x.size();
  out.coordinates.assign(n, 0.0);
  if (n == 0) {
    out.degenerate = true;
    return out;
  }
  const std::size_t m = x.front().size();
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (const auto& row : x) mean += row[j];
    mean /= static_cast<double>(n);
    for (auto& row : x) row[j] -= mean;
  }

  double trace = 0.0;
  for (const auto& row : x)
    for (double v : row) trace += v * v;
  if (m == 0 || trace <= 1e-300) {
    out.degenerate = true;
    return out;
  }

  // v -> X^T X v
  const auto apply = [&](const std::vector<double>& v) {
    std::vector<double> xv(n, 0.0), out_v(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) xv[i] += x[i][j] * v[j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) out_v[j] += x[i][j] * xv[i];
    return out_v;
  };
  const auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return std::sqrt(s);
  };
  const auto normalise = [&](std::vector<double>& v) {
    const double len = norm(v);
    for (auto& e : v) e /= len;
    std::size_t big = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
      if (std::abs(v[j]) > std::abs(v[big])) big = j;
    if (v[big] < 0)
      for (auto& e : v) e = -e;
  };

  std::vector<double> v(m, 1.0);
  if (norm(apply(v)) <= 1e-12 * trace) {
    // The all-ones direction is orthogonal to the data; start from the
    // longest centred row instead.
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (norm(x[i]) > norm(x[best])) best = i;
    v = x[best];
  }
  normalise(v);

  for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
    auto next = apply(v);
    if (norm(next) == 0.0) break;
    normalise(next);
    double diff = 0.0;
    for (std::size_t j = 0; j < m; ++j) diff = std::max(diff, std::abs(next[j] - v[j]));
    v = std::move(next);
    if (diff < tol) break;
  }
  out.iterations = std::min(out.iterations, max_iter);

  out.loading = v;
  for (std::size_t i = 0; i < n; ++i) {
    double c = 0.0;
    for (std::size_t j = 0; j < m; ++j) c += x[i][j] * v[j];
    out.coordinates[i] = c;
  }
  return out;
}

struct LandscapePoint {
  std::size_t entry = 0;
  double x = 0.0;  // problem-side coordinate
  double y = 0.0;  // method-side coordinate
  double value = 0.0;
};

struct Landscape {
  std::vector<LandscapePoint> points;
  bool problem_degenerate = false;
  bool method_degenerate = false;
};

namespace detail {

inline std::vector<std::vector<double>> indicator_rows(const std::vector<std::set<Cell>>& sets) {
  std::set<Cell> all;
  for (const auto& s : sets) all.insert(s.begin(), s.end());
  std::map<Cell, std::size_t> column;
  for (const auto& c : all) column.emplace(c, column.size());
  std::vector<std::vector<double>> rows(sets.size(), std::vector<double>(all.size(), 0.0));
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (const auto& c : sets[i]) rows[i][column.at(c)] = 1.0;
  return rows;
}

}  // namespace detail

/// Problem fingerprints are mapped back to nodes through the injective bin
/// map at their own resolution and rebinned at K = 32; method paths are
/// binned at K = 32 keeping s-nodes. Stale entries are skipped.
inline Landscape landscape_export(const MemoryRepository& repo, const Embedding& ep, const Embedding& ea,
                                  const FactoredTree& ta, const std::string& observable) {
  if (repo.entries.empty()) throw Error("memory is empty");
  if (repo.problem_tag != ep.tree_version)
    throw VersionError("problem embedding is for tree " + ep.tree_version + ", repository holds " + repo.problem_tag);

  std::map<int, std::map<Cell, NodeId>> inverse;  // K -> cell -> node
  std::vector<std::set<Cell>> problem_sets, method_sets;
  Landscape out;
  for (std::size_t i = 0; i < repo.entries.size(); ++i) {
    const MemoryEntry& e = repo.entries[i];
    if (e.stale) continue;
    auto obs = e.observables.find(observable);
    if (obs == e.observables.end()) throw Error("entry " + std::to_string(i) + " has no observable " + observable);

    auto& inv = inverse[e.problem_fp.K];
    if (inv.empty())
      for (const auto& [v, c] : bin(ep, e.problem_fp.K)) inv.emplace(c, v);
    std::set<Cell> pcells;
    for (const auto& c : e.problem_fp.cells) {
      auto it = inv.find(c);
      if (it == inv.end()) throw Error("problem fingerprint cell has no node in the problem tree");
      pcells.insert(bin_point(ep.position.at(it->second), ep.depth.at(it->second), kLandscapeResolution));
    }
    std::set<Cell> mcells;
    for (const auto& v : e.method_path_nodes) {
      auto et = ta.edge_type.find(v);
      if (et == ta.edge_type.end() || et->second != EdgeType::subdivides_in) continue;
      auto pos = ea.position.find(v);
      if (pos == ea.position.end()) throw Error("method path node " + v + " is not in the action embedding");
      mcells.insert(bin_point(pos->second, ea.depth.at(v), kLandscapeResolution));
    }
    problem_sets.push_back(std::move(pcells));
    method_sets.push_back(std::move(mcells));
    out.points.push_back({i, 0.0, 0.0, obs->second});
  }
  if (out.points.empty()) throw Error("memory has no current entries");

  const auto px = first_principal_axis(detail::indicator_rows(problem_sets));
  const auto my = first_principal_axis(detail::indicator_rows(method_sets));
  out.problem_degenerate = px.degenerate;
  out.method_degenerate = my.degenerate;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    out.points[i].x = px.coordinates[i];
    out.points[i].y = my.coordinates[i];
  }
  return out;
}

}  // namespace graft
