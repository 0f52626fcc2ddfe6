#pragma once

// Repository of solved instances, neighbour ranking, reward-weighted prior
// compilation and prior inheritance across tree edits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "graft/distribution.hpp"
#include "graft/embedding.hpp"

namespace graft {

inline constexpr double kRewardMax = 100.0;

using Observables = std::map<std::string, double>;

struct MemoryEntry {
  Fingerprint problem_fp;             // problem tree, K*, s-only
  MethodTuple method;
  std::set<NodeId> method_path_nodes;  // on the action tree
  Observables observables;
  double reward = 0.0;
  std::string action_version;          // action tree version the method was drawn on
  bool stale = false;                  // references a node no longer in the action tree

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

struct MemoryRepository {
  std::string problem_tag;     // problem tree version
  std::string action_version;  // current action tree version
  std::vector<MemoryEntry> entries;

  std::size_t size() const { return entries.size(); }

  friend bool operator==(const MemoryRepository&, const MemoryRepository&) = default;
};

struct PriorParams {
  std::size_t n_neighbors = 3;
  double kappa = 7.0;
  double s0 = 0.55;
  double r_max = kRewardMax;
};

/// Appends `entry`. Earlier entries are never touched.
inline void record(MemoryRepository& repo, MemoryEntry entry) {
  if (!(entry.reward >= 0.0 && entry.reward <= kRewardMax))
    throw Error("reward " + std::to_string(entry.reward) + " outside [0, 100]");
  if (entry.problem_fp.tree_tag != repo.problem_tag)
    throw VersionError("entry problem fingerprint is for tree " + entry.problem_fp.tree_tag + ", repository holds " +
                       repo.problem_tag);
  if (entry.action_version != repo.action_version)
    throw VersionError("entry method is for action tree " + entry.action_version + ", repository holds " +
                       repo.action_version);
  repo.entries.push_back(std::move(entry));
}

/// Builds an entry for a method drawn on `s`.
inline MemoryEntry make_entry(const Substrate& s, Fingerprint problem_fp, MethodTuple method, Observables obs,
                              double reward) {
  MemoryEntry e;
  e.problem_fp = std::move(problem_fp);
  e.method_path_nodes = method_path(s, method);
  e.method = std::move(method);
  e.observables = std::move(obs);
  e.reward = reward;
  e.action_version = s.version;
  return e;
}

struct Neighbor {
  std::size_t index = 0;  // position in the repository
  double similarity = 0.0;
};

/// Top `n` non-stale entries by similarity, then reward, then insertion order.
inline std::vector<Neighbor> rank_neighbors(const MemoryRepository& repo, const Fingerprint& p_new, std::size_t n) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < repo.entries.size(); ++i) {
    if (repo.entries[i].stale) continue;
    all.push_back({i, jaccard(p_new, repo.entries[i].problem_fp)});
  }
  std::stable_sort(all.begin(), all.end(), [&](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return repo.entries[a.index].reward > repo.entries[b.index].reward;
  });
  if (all.size() > n) all.resize(n);
  return all;
}

inline double similarity_gate(double similarity, const PriorParams& p = {}) {
  return 1.0 / (1.0 + std::exp(-p.kappa * (similarity - p.s0)));
}

inline double neighbor_weight(double similarity, double reward, const PriorParams& p = {}) {
  return similarity_gate(similarity, p) * reward / p.r_max;
}

/// Row contribution of one entry: one-hot on decision nodes its path
/// visits, uniform elsewhere.
inline PolicyRows partial_spec(const MemoryEntry& entry, const Substrate& s) {
  for (const auto& v : entry.method_path_nodes)
    if (!s.tree.contains(v)) throw Error("entry path references removed node " + v + "; re-encode the entry");
  PolicyRows out = uniform_rows(s);
  for (auto& [u, row] : out.rows) {
    if (!entry.method_path_nodes.count(u)) continue;
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!entry.method_path_nodes.count(row.options[i])) continue;
      if (pick) throw Error("entry path visits two children of " + u);
      pick = i;
    }
    if (!pick) continue;
    std::fill(row.mass.begin(), row.mass.end(), 0.0);
    row.mass[*pick] = 1.0;
  }
  return out;
}

/// Neighbour-evidence rows blended with the uniform prior. Rule operators
/// are not folded into the rows: they act on chain distributions whenever
/// the prior is sampled or evaluated, so they override any blend.
inline PolicyRows compile_prior(const MemoryRepository& repo, const Fingerprint& p_new, const Substrate& s,
                                const PriorParams& params = {}) {
  if (repo.action_version != s.version)
    throw VersionError("repository is for action tree " + repo.action_version + ", substrate is " + s.version);
  const PolicyRows mu = uniform_rows(s);

  std::vector<std::pair<double, const MemoryEntry*>> weighted;
  double w_tot = 0.0;
  std::size_t n_eff = 0;
  for (const auto& nb : rank_neighbors(repo, p_new, params.n_neighbors)) {
    const MemoryEntry& e = repo.entries[nb.index];
    const double w = neighbor_weight(nb.similarity, e.reward, params);
    if (w > 0.0) {
      weighted.emplace_back(w, &e);
      w_tot += w;
      ++n_eff;
    }
  }
  if (w_tot == 0.0) return mu;

  const double w_bar = std::clamp(w_tot / static_cast<double>(n_eff), 0.0, 1.0);
  PolicyRows data = mu;
  for (auto& [u, row] : data.rows) std::fill(row.mass.begin(), row.mass.end(), 0.0);
  for (const auto& [w, e] : weighted) {
    const PolicyRows spec = partial_spec(*e, s);
    for (auto& [u, row] : data.rows) {
      const auto& contrib = spec.rows.at(u).mass;
      for (std::size_t i = 0; i < row.size(); ++i) row.mass[i] += w * contrib[i];
    }
  }
  PolicyRows out = mu;
  for (auto& [u, row] : out.rows) {
    const auto& d = data.rows.at(u).mass;
    const auto& m = mu.rows.at(u).mass;
    for (std::size_t i = 0; i < row.size(); ++i) row.mass[i] = w_bar * (d[i] / w_tot) + (1.0 - w_bar) * m[i];
  }
  return out;
}

/// Rows for the decision nodes of `s` inherited from `old`: options present
/// in the old row keep their mass, new options get the mean of the kept
/// masses, then the row is renormalised. Nodes without an old row are uniform.
inline PolicyRows inherit_rows(const PolicyRows& old, const Substrate& s) {
  PolicyRows out = uniform_rows(s);
  for (auto& [u, row] : out.rows) {
    auto it = old.rows.find(u);
    if (it == old.rows.end()) continue;
    const ProbabilityRow& prev = it->second;
    std::vector<std::optional<double>> kept(row.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      auto pos = std::find(prev.options.begin(), prev.options.end(), row.options[i]);
      if (pos == prev.options.end()) continue;
      kept[i] = prev.mass[static_cast<std::size_t>(pos - prev.options.begin())];
      sum += *kept[i];
      ++n;
    }
    if (n == 0) continue;
    const double mean = sum / static_cast<double>(n);
    for (std::size_t i = 0; i < row.size(); ++i) row.mass[i] = kept[i].value_or(mean);
    const double total = row.total();
    if (!(total > 0.0)) {
      row = ProbabilityRow::uniform(row.options);
      continue;
    }
    if (total != 1.0)
      for (auto& m : row.mass) m /= total;
  }
  return out;
}

struct EditResult {
  Substrate substrate;
  PolicyRows rows;
};

/// Adds `child` under `parent` and rebuilds. The edge type defaults to the
/// type of the parent's existing children (s for a leaf parent).
inline EditResult grow_tree(const Substrate& s, const PolicyRows& rows, const NodeId& parent, const NodeId& child,
                            std::optional<EdgeType> type = std::nullopt) {
  if (!s.tree.contains(parent)) throw Error("unknown parent " + parent);
  if (s.graph.has_node(child)) throw Error("node " + child + " already exists");
  KnowledgeGraph g = s.graph;
  g.nodes.push_back({child, std::nullopt});
  g.edges.push_back({parent, child, type.value_or(s.tree.child_type(parent).value_or(EdgeType::subdivides_in))});
  EditResult r{build_substrate(g), {}};
  r.rows = inherit_rows(rows, r.substrate);
  return r;
}

/// Removes the leaf option `node`; its mass goes to its siblings in
/// proportion. Rules lose the node from their trigger and target lists and
/// are dropped when either list becomes empty.
inline EditResult remove_node(const Substrate& s, const PolicyRows& rows, const NodeId& node) {
  if (!s.tree.contains(node)) throw Error("unknown node " + node);
  if (!s.tree.is_leaf(node)) throw Error("node " + node + " is not a leaf");
  const auto parent = s.tree.parent_of(node);
  if (!parent) throw Error("cannot remove the root");
  if (s.tree.children_of(*parent).size() < 2) throw Error("cannot remove the sole child of " + *parent);

  KnowledgeGraph g = s.graph;
  std::erase_if(g.nodes, [&](const NodeDecl& n) { return n.id == node; });
  std::erase_if(g.edges, [&](const Edge& e) { return e.parent == node || e.child == node; });
  std::erase_if(g.canonical_parent, [&](const auto& kv) { return kv.first == node || kv.second == node; });
  for (auto& rule : g.rules) {
    std::erase(rule.trigger, node);
    std::erase(rule.target, node);
  }
  std::erase_if(g.rules, [](const Rule& r) { return r.trigger.empty() || r.target.empty(); });

  PolicyRows adjusted = rows;
  if (auto it = adjusted.rows.find(*parent); it != adjusted.rows.end()) it->second = op_zero(it->second, {node});

  EditResult r{build_substrate(g), {}};
  r.rows = inherit_rows(adjusted, r.substrate);
  return r;
}

/// Points the repository at a rebuilt action tree and flags entries whose
/// method paths use nodes that no longer exist.
inline void rebase(MemoryRepository& repo, const Substrate& s) {
  repo.action_version = s.version;
  for (auto& e : repo.entries)
    for (const auto& v : e.method_path_nodes)
      if (!s.tree.contains(v)) {
        e.stale = true;
        break;
      }
}

}  // namespace graft
