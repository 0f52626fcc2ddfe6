#pragma once

// Chain dependency graph H = rule edges + nesting edges, Tarjan acyclicity
// certificate and longest-path decision levels.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "graft/reduction.hpp"

namespace graft {

using ChainEdge = std::pair<std::size_t, std::size_t>;

struct DependencyGraph {
  std::size_t size = 0;                 // number of chains
  std::set<ChainEdge> rule_edges;       // E
  std::set<ChainEdge> nesting_edges;    // E_rho
  std::vector<std::set<std::size_t>> parents;

  std::set<ChainEdge> all_edges() const {
    auto all = rule_edges;
    all.insert(nesting_edges.begin(), nesting_edges.end());
    return all;
  }

  friend bool operator==(const DependencyGraph&, const DependencyGraph&) = default;
};

inline DependencyGraph make_dependency_graph(std::size_t n, std::set<ChainEdge> rule_edges,
                                             std::set<ChainEdge> nesting_edges) {
  DependencyGraph h;
  h.size = n;
  h.rule_edges = std::move(rule_edges);
  h.nesting_edges = std::move(nesting_edges);
  h.parents.assign(n, {});
  for (const auto& [a, b] : h.all_edges()) h.parents.at(b).insert(a);
  return h;
}

namespace detail {

inline std::string rule_name(const Rule& r, std::size_t index) {
  return "rule " + std::to_string(index) + (r.hint.empty() ? "" : " (" + r.hint + ")");
}

}  // namespace detail

/// Target chain of a rule; every target must sit on the same chain.
inline std::size_t target_chain(const ChainIndex& ci, const Rule& r, std::size_t index) {
  std::optional<std::size_t> chain;
  for (const auto& g : r.target) {
    const auto c = ci.chain_of(g);
    if (!c) throw BuildError("rules", detail::rule_name(r, index) + " targets the global root");
    if (chain && *chain != *c)
      throw BuildError("rules", detail::rule_name(r, index) + " target spans chains " +
                                    ci.chains[*chain].id + " and " + ci.chains[*c].id);
    chain = c;
  }
  if (!chain) throw BuildError("rules", detail::rule_name(r, index) + " has an empty target");
  return *chain;
}

/// Rule edges nu(t) -> nu(g) between distinct chains plus every nesting edge.
inline DependencyGraph expand_rules(const ChainIndex& ci, const std::vector<Rule>& rules) {
  std::set<ChainEdge> e;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::size_t j = target_chain(ci, rules[i], i);
    for (const auto& t : rules[i].trigger) {
      const auto c = ci.chain_of(t);
      if (!c) throw BuildError("rules", detail::rule_name(rules[i], i) + " is triggered by the global root");
      if (*c != j) e.emplace(*c, j);
    }
  }
  std::set<ChainEdge> nest;
  for (std::size_t k = 0; k < ci.chains.size(); ++k)
    if (const auto p = ci.nesting_parent[k]) nest.emplace(*p, k);
  return make_dependency_graph(ci.chains.size(), std::move(e), std::move(nest));
}

/// Tarjan's strongly connected components. Returns nullopt when every
/// component is a singleton, otherwise one non-singleton component (sorted).
inline std::optional<std::vector<std::size_t>> check_acyclic(const DependencyGraph& h) {
  const std::size_t n = h.size;
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [a, b] : h.all_edges()) adj[a].push_back(b);

  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, unvisited), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::size_t counter = 0;
  std::optional<std::vector<std::size_t>> witness;

  std::function<void(std::size_t)> connect = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = 1;
    for (std::size_t w : adj[v]) {
      if (index[w] == unvisited) {
        connect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] != index[v]) return;
    std::vector<std::size_t> component;
    std::size_t w;
    do {
      w = stack.back();
      stack.pop_back();
      on_stack[w] = 0;
      component.push_back(w);
    } while (w != v);
    if (component.size() > 1 && !witness) {
      std::sort(component.begin(), component.end());
      witness = std::move(component);
    }
  };

  for (std::size_t v = 0; v < n; ++v)
    if (index[v] == unvisited) connect(v);
  return witness;
}

using LevelMap = std::vector<std::size_t>;

/// Monotone fix-point level(b) <- max(level(b), level(a) + w(a)) from all
/// zeros, with w(a) = 1 except for chains flagged in `passthrough` (single
/// forced member, no decision), which do not consume a level. Throws on
/// cyclic input.
inline LevelMap assign_levels(const DependencyGraph& h, const std::vector<bool>& passthrough = {}) {
  if (check_acyclic(h)) throw BuildError("levels", "dependency graph is cyclic");
  LevelMap level(h.size, 0);
  const auto edges = h.all_edges();
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [a, b] : edges) {
      const std::size_t w = a < passthrough.size() && passthrough[a] ? 0 : 1;
      if (level[a] + w > level[b]) {
        level[b] = level[a] + w;
        changed = true;
      }
    }
  }
  return level;
}

/// Sampling order: by level, parents before children within a level, then
/// by chain index. Throws on cyclic input.
inline std::vector<std::size_t> sampling_order(const DependencyGraph& h, const LevelMap& level) {
  std::vector<std::size_t> indegree(h.size, 0);
  std::vector<std::vector<std::size_t>> adj(h.size);
  for (const auto& [a, b] : h.all_edges()) {
    adj[a].push_back(b);
    ++indegree[b];
  }
  std::set<std::size_t> ready;
  for (std::size_t v = 0; v < h.size; ++v)
    if (indegree[v] == 0) ready.insert(v);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (std::size_t w : adj[v])
      if (--indegree[w] == 0) ready.insert(w);
  }
  if (order.size() != h.size) throw BuildError("levels", "dependency graph is cyclic");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return level[a] < level[b]; });
  return order;
}

}  // namespace graft
