#pragma once

// Factored policy over method tuples: per-node rows, rule-edited chain
// distributions, extended chain kernels, exact joint probability,
// enumeration and level-by-level sampling.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "graft/rng.hpp"
#include "graft/substrate.hpp"

namespace graft {

/// One row per decision node (node with s-children), shared across every
/// parent context.
struct PolicyRows {
  std::string tree_version;
  std::map<NodeId, ProbabilityRow> rows;

  const ProbabilityRow& at(const NodeId& u) const {
    auto it = rows.find(u);
    if (it == rows.end()) throw Error("no row for node " + u);
    return it->second;
  }

  friend bool operator==(const PolicyRows&, const PolicyRows&) = default;
};

/// Chain id -> picked alphabet member, or nullopt for the inactive marker.
struct MethodTuple {
  std::map<std::string, std::optional<NodeId>> picks;

  friend auto operator<=>(const MethodTuple&, const MethodTuple&) = default;
};

inline PolicyRows uniform_rows(const Substrate& s) {
  PolicyRows r;
  r.tree_version = s.version;
  for (const auto& v : s.tree.nodes)
    if (s.tree.is_decision(v)) r.rows.emplace(v, ProbabilityRow::uniform(s.tree.children_of(v)));
  return r;
}

/// Throws unless `rows` has exactly one valid row per decision node of `s`.
inline void check_rows(const Substrate& s, const PolicyRows& rows, double tol = 1e-9) {
  if (rows.tree_version != s.version)
    throw VersionError("rows built for tree " + rows.tree_version + ", substrate is " + s.version);
  std::size_t n = 0;
  for (const auto& v : s.tree.nodes) {
    if (!s.tree.is_decision(v)) continue;
    ++n;
    const auto& row = rows.at(v);
    if (row.options != s.tree.children_of(v)) throw Error("row " + v + " does not list the node's children");
    if (!row.is_distribution(tol)) throw Error("row " + v + " is not a probability distribution");
  }
  if (n != rows.rows.size()) throw Error("rows contain entries for non-decision nodes");
}

namespace detail {

// Per-chain pick: alphabet index, or one of the two markers.
inline constexpr int kInactive = -1;
inline constexpr int kUnresolved = -2;
using Picks = std::vector<int>;

inline Picks to_picks(const Substrate& s, const MethodTuple& m, bool require_complete) {
  Picks p(s.chain_count(), kUnresolved);
  for (const auto& [id, pick] : m.picks) {
    const auto k = s.chains.find(id);
    if (!k) throw Error("unknown chain " + id);
    if (!pick) {
      p[*k] = kInactive;
    } else if (auto a = s.pick_index(*k, *pick)) {
      p[*k] = static_cast<int>(*a);
    } else {
      throw Error(*pick + " is not in the alphabet of chain " + id);
    }
  }
  if (require_complete)
    for (std::size_t k = 0; k < p.size(); ++k)
      if (p[k] == kUnresolved) throw Error("no pick for chain " + s.chain(k).id);
  return p;
}

inline MethodTuple to_tuple(const Substrate& s, const Picks& p) {
  MethodTuple m;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == kUnresolved) continue;
    m.picks[s.chain(k).id] =
        p[k] == kInactive ? std::nullopt : std::optional<NodeId>(s.chain(k).alphabet[p[k]]);
  }
  return m;
}

inline int resolved(const Substrate& s, const Picks& p, std::size_t chain, std::size_t for_chain) {
  if (p[chain] == kUnresolved)
    throw Error("chain " + s.chain(chain).id + " must be resolved before chain " + s.chain(for_chain).id);
  return p[chain];
}

inline bool is_active(const Substrate& s, const Picks& p, std::size_t k) {
  const auto& gate = s.gate[k];
  if (!gate) return true;
  return resolved(s, p, gate->first, k) == static_cast<int>(gate->second);
}

inline bool fires(const Substrate& s, const ResolvedRule& r, const Picks& p) {
  if (r.inert) return false;
  for (const auto& [chain, mask] : r.trigger_mask) {
    const int a = resolved(s, p, chain, r.chain);
    if (a < 0 || !mask[static_cast<std::size_t>(a)]) return false;
  }
  return true;
}

}  // namespace detail

/// Path product of rows from the chain root to each alphabet member.
inline ProbabilityRow chain_distribution(const Substrate& s, const PolicyRows& rows, std::size_t k) {
  ProbabilityRow out;
  out.options = s.chain(k).alphabet;
  out.mass.reserve(out.options.size());
  for (const auto& path : s.paths[k]) {
    double m = 1.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) m *= rows.at(path[i]).mass_of(path[i + 1]);
    out.mass.push_back(m);
  }
  return out;
}

namespace detail {

inline ProbabilityRow edited(const Substrate& s, const PolicyRows& rows, std::size_t k, const Picks& p) {
  ProbabilityRow dist = chain_distribution(s, rows, k);
  std::vector<std::size_t> fired;
  for (const auto& r : s.rules) {
    if (r.chain != k || !fires(s, r, p)) continue;
    fired.push_back(r.index);
    try {
      dist = apply_effect(s.graph.rules[r.index].effect, dist, r.slice);
    } catch (const EmptySupportError& e) {
      std::string names;
      for (auto i : fired) names += (names.empty() ? "" : ", ") + rule_name(s.graph.rules[i], i);
      throw EmptySupportError(e.row(), e.target(),
                              "rules " + names + " leave empty support on chain " + s.chain(k).id);
    }
  }
  return dist;
}

}  // namespace detail

/// Chain distribution after composing, in rule-list order, every rule on
/// `chain` whose triggers are all selected by `resolved`. Chains the rules
/// read must already be resolved.
inline ProbabilityRow edited_chain_distribution(const Substrate& s, const PolicyRows& rows,
                                                std::size_t chain, const MethodTuple& resolved) {
  return detail::edited(s, rows, chain, detail::to_picks(s, resolved, false));
}

/// Distribution over the alphabet plus the inactive marker.
struct ChainKernel {
  bool active = true;
  ProbabilityRow row;      // zero everywhere when inactive
  double inactive_mass = 0.0;

  friend bool operator==(const ChainKernel&, const ChainKernel&) = default;
};

namespace detail {

inline ChainKernel kernel(const Substrate& s, const PolicyRows& rows, std::size_t k, const Picks& p) {
  ChainKernel out;
  if (is_active(s, p, k)) {
    out.row = edited(s, rows, k, p);
    return out;
  }
  out.active = false;
  out.row.options = s.chain(k).alphabet;
  out.row.mass.assign(out.row.options.size(), 0.0);
  out.inactive_mass = 1.0;
  return out;
}

}  // namespace detail

inline ChainKernel chain_kernel(const Substrate& s, const PolicyRows& rows, std::size_t chain,
                                const MethodTuple& resolved) {
  return detail::kernel(s, rows, chain, detail::to_picks(s, resolved, false));
}

namespace detail {

inline double probability(const Substrate& s, const PolicyRows& rows, const Picks& p) {
  double prob = 1.0;
  for (std::size_t k : s.order) {
    const bool active = is_active(s, p, k);
    if (!active) {
      if (p[k] != kInactive) return 0.0;
      continue;
    }
    if (p[k] < 0) return 0.0;
    prob *= edited(s, rows, k, p).mass[static_cast<std::size_t>(p[k])];
    if (prob == 0.0) return 0.0;
  }
  return prob;
}

}  // namespace detail

/// Product of chain kernels in level order. Tuples with a missing chain,
/// an unknown member or an inconsistent activity pattern get 0.
inline double method_probability(const Substrate& s, const PolicyRows& rows, const MethodTuple& m) {
  detail::Picks p;
  try {
    p = detail::to_picks(s, m, true);
  } catch (const Error&) {
    return 0.0;
  }
  return detail::probability(s, rows, p);
}

struct SupportEntry {
  MethodTuple method;
  double probability = 0.0;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// Every structurally admissible tuple with its exact probability, in
/// depth-first order over the sampling order. Zero-mass members of active
/// chains are listed with probability 0.
inline std::vector<SupportEntry> enumerate_support(const Substrate& s, const PolicyRows& rows,
                                                   std::uint64_t cap = kDefaultEnumerationCap) {
  const auto joint = s.footprint().joint;
  if (joint > cap)
    throw Error("enumeration cap exceeded: joint size " + std::to_string(joint) + " > " + std::to_string(cap));

  std::vector<SupportEntry> out;
  detail::Picks p(s.chain_count(), detail::kUnresolved);
  auto visit = [&](auto& self, std::size_t depth, double prob) -> void {
    if (depth == s.order.size()) {
      out.push_back({detail::to_tuple(s, p), prob});
      return;
    }
    const std::size_t k = s.order[depth];
    if (!detail::is_active(s, p, k)) {
      p[k] = detail::kInactive;
      self(self, depth + 1, prob);
    } else {
      std::vector<double> mass;
      try {
        mass = detail::edited(s, rows, k, p).mass;
      } catch (const EmptySupportError&) {
        if (prob != 0.0) throw;
        mass.assign(s.chain(k).alphabet.size(), 0.0);  // unreachable context
      }
      for (std::size_t a = 0; a < mass.size(); ++a) {
        p[k] = static_cast<int>(a);
        self(self, depth + 1, prob * mass[a]);
      }
    }
    p[k] = detail::kUnresolved;
  };
  visit(visit, 0, 1.0);
  return out;
}

/// Union of the root-to-pick paths of the active chains.
inline std::set<NodeId> method_path(const Substrate& s, const MethodTuple& m) {
  const auto p = detail::to_picks(s, m, false);
  std::set<NodeId> nodes;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] >= 0) {
      const auto& path = s.paths[k][static_cast<std::size_t>(p[k])];
      nodes.insert(path.begin(), path.end());
    }
  return nodes;
}

namespace detail {

inline std::size_t draw(Rng& rng, const std::vector<double>& mass) {
  double total = 0.0;
  for (double m : mass) total += m;
  const double u = rng.next_double() * total;
  double acc = 0.0;
  std::size_t last = mass.size();
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    acc += mass[i];
    last = i;
    if (u < acc) return i;
  }
  if (last == mass.size()) throw Error("cannot draw from an all-zero distribution");
  return last;
}

inline Picks draw_tuple(const Substrate& s, const PolicyRows& rows, Rng& rng) {
  Picks p(s.chain_count(), kUnresolved);
  for (std::size_t k : s.order) {
    if (!is_active(s, p, k)) {
      p[k] = kInactive;
      continue;
    }
    p[k] = static_cast<int>(draw(rng, edited(s, rows, k, p).mass));
  }
  return p;
}

}  // namespace detail

inline constexpr std::size_t kDefaultSampleRetries = 64;

/// Level-by-level draw seeded by `seed`. Whole tuples in `avoid` are
/// rejected and redrawn up to `max_retries` times, after which the draw is
/// made from the enumerated support minus `avoid`.
inline MethodTuple sample_method(const Substrate& s, const PolicyRows& rows, std::uint64_t seed,
                                 const std::set<MethodTuple>& avoid = {},
                                 std::size_t max_retries = kDefaultSampleRetries) {
  Rng rng(seed);
  for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
    MethodTuple m = detail::to_tuple(s, detail::draw_tuple(s, rows, rng));
    if (!avoid.count(m)) return m;
  }
  std::vector<SupportEntry> remaining;
  for (auto& e : enumerate_support(s, rows))
    if (e.probability > 0.0 && !avoid.count(e.method)) remaining.push_back(std::move(e));
  if (remaining.empty()) throw SupportExhaustedError("support exhausted by the avoid set");
  std::vector<double> mass;
  for (const auto& e : remaining) mass.push_back(e.probability);
  return remaining[detail::draw(rng, mass)].method;
}

}  // namespace graft
