#pragma once

// Categorical rows and the two rule operators acting on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "graft/error.hpp"
#include "graft/graph.hpp"

namespace graft {

/// Categorical distribution over an ordered option list.
struct ProbabilityRow {
  std::vector<NodeId> options;
  std::vector<double> mass;

  std::size_t size() const { return options.size(); }

  std::size_t index_of(const NodeId& v) const {
    auto it = std::find(options.begin(), options.end(), v);
    if (it == options.end()) throw Error("option " + v + " not in row");
    return static_cast<std::size_t>(it - options.begin());
  }

  double mass_of(const NodeId& v) const { return mass[index_of(v)]; }

  double total() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }

  bool is_distribution(double tol = 1e-12) const {
    if (mass.size() != options.size() || mass.empty()) return false;
    for (double m : mass)
      if (!(m >= 0.0 && m <= 1.0 + tol)) return false;
    return std::abs(total() - 1.0) <= tol;
  }

  static ProbabilityRow uniform(std::vector<NodeId> options) {
    ProbabilityRow r;
    const double m = 1.0 / static_cast<double>(options.size());
    r.mass.assign(options.size(), m);
    r.options = std::move(options);
    return r;
  }

  friend bool operator==(const ProbabilityRow&, const ProbabilityRow&) = default;
};

namespace detail {

inline std::string describe_row(const ProbabilityRow& row) {
  std::string s = "[";
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) s += ", ";
    s += row.options[i];
  }
  return s + "]";
}

inline std::vector<char> membership(const ProbabilityRow& row, const std::set<NodeId>& target) {
  std::vector<char> in(row.size(), 0);
  for (std::size_t i = 0; i < row.size(); ++i) in[i] = target.count(row.options[i]) ? 1 : 0;
  return in;
}

// Keeps the options flagged `keep`, rescaled by their summed pre-mass.
inline ProbabilityRow restrict_to(const ProbabilityRow& row, const std::vector<char>& keep,
                                  const std::set<NodeId>& target, const char* op) {
  double kept = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i)
    if (keep[i]) kept += row.mass[i];
  if (!(kept > 0.0))
    throw EmptySupportError(describe_row(row), {target.begin(), target.end()},
                            std::string(op) + " leaves empty support on row " + describe_row(row));
  ProbabilityRow out = row;
  for (std::size_t i = 0; i < row.size(); ++i) out.mass[i] = keep[i] ? row.mass[i] / kept : 0.0;
  return out;
}

}  // namespace detail

/// Zeroes the mass on `target` and renormalises over the survivors.
inline ProbabilityRow op_zero(const ProbabilityRow& row, const std::set<NodeId>& target) {
  auto keep = detail::membership(row, target);
  for (auto& k : keep) k = !k;
  return detail::restrict_to(row, keep, target, "zero_out");
}

/// Confines support to `target` and renormalises there.
inline ProbabilityRow op_force(const ProbabilityRow& row, const std::set<NodeId>& target) {
  return detail::restrict_to(row, detail::membership(row, target), target, "force");
}

inline ProbabilityRow apply_effect(Effect e, const ProbabilityRow& row, const std::set<NodeId>& target) {
  return e == Effect::force ? op_force(row, target) : op_zero(row, target);
}

}  // namespace graft
