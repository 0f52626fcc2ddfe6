#pragma once

// Spanning-tree projection of a knowledge DAG and chain extraction.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "graft/graph.hpp"

namespace graft {

struct FactoredTree {
  NodeId root;
  std::vector<NodeId> nodes;                       // sorted
  std::map<NodeId, NodeId> parent;                 // absent for root
  std::map<NodeId, EdgeType> edge_type;            // type of the edge into the node
  std::map<NodeId, std::vector<NodeId>> children;  // every node has an entry, sorted by id

  bool contains(const NodeId& v) const { return children.count(v) != 0; }

  const std::vector<NodeId>& children_of(const NodeId& v) const { return children.at(v); }

  bool is_leaf(const NodeId& v) const { return children_of(v).empty(); }

  /// Type shared by all children of `v`; nullopt for leaves.
  std::optional<EdgeType> child_type(const NodeId& v) const {
    const auto& ch = children_of(v);
    if (ch.empty()) return std::nullopt;
    return edge_type.at(ch.front());
  }

  /// Node with s-children: owns one probability row.
  bool is_decision(const NodeId& v) const { return child_type(v) == EdgeType::subdivides_in; }

  std::optional<NodeId> parent_of(const NodeId& v) const {
    auto it = parent.find(v);
    if (it == parent.end()) return std::nullopt;
    return it->second;
  }

  std::size_t depth(const NodeId& v) const {
    std::size_t d = 0;
    for (auto p = parent.find(v); p != parent.end(); p = parent.find(p->second)) ++d;
    return d;
  }

  bool is_ancestor_or_self(const NodeId& a, const NodeId& b) const {
    NodeId cur = b;
    while (true) {
      if (cur == a) return true;
      auto it = parent.find(cur);
      if (it == parent.end()) return false;
      cur = it->second;
    }
  }

  friend bool operator==(const FactoredTree&, const FactoredTree&) = default;
};

/// Spanning tree of `g` rooted at `g.root`. A multi-parent node keeps its
/// canonical_parent annotation if present; otherwise the lexicographically
/// smallest parent among those at the shallowest breadth-first depth.
inline FactoredTree reduce_to_tree(const KnowledgeGraph& g) {
  if (auto report = validate_graph(g); !report.ok())
    throw BuildError("reduce", report.violations.front().message);

  const auto out = detail::out_edges(g);
  std::map<NodeId, std::vector<const Edge*>> in;
  for (const auto& e : g.edges) in[e.child].push_back(&e);

  // Breadth-first depth (shortest distance from root).
  std::map<NodeId, std::size_t> depth{{g.root, 0}};
  std::vector<NodeId> frontier{g.root};
  while (!frontier.empty()) {
    std::vector<NodeId> next;
    for (const auto& u : frontier)
      if (auto it = out.find(u); it != out.end())
        for (const Edge* e : it->second)
          if (depth.emplace(e->child, depth[u] + 1).second) next.push_back(e->child);
    frontier = std::move(next);
  }

  FactoredTree t;
  t.root = g.root;
  for (const auto& n : g.nodes) {
    t.nodes.push_back(n.id);
    t.children[n.id];
  }
  std::sort(t.nodes.begin(), t.nodes.end());

  for (const auto& v : t.nodes) {
    if (v == g.root) continue;
    const auto it = depth.find(v);
    if (it == depth.end()) throw BuildError("reduce", "unreachable node " + v);
    const auto& parents = in.at(v);
    const Edge* kept = nullptr;
    if (auto cp = g.canonical_parent.find(v); cp != g.canonical_parent.end()) {
      for (const Edge* e : parents)
        if (e->parent == cp->second) kept = e;
    } else {
      for (const Edge* e : parents) {
        if (depth.at(e->parent) + 1 != it->second) continue;
        if (!kept || e->parent < kept->parent) kept = e;
      }
    }
    if (!kept) throw BuildError("reduce", "no admissible parent for " + v);
    t.parent[v] = kept->parent;
    t.edge_type[v] = kept->type;
    t.children[kept->parent].push_back(v);
  }
  for (auto& [_, ch] : t.children) std::sort(ch.begin(), ch.end());
  return t;
}

/// A piece of the tree rooted at a c-node whose interior vertices are
/// s-decisions. `alphabet` lists the chain's terminal nodes (members without
/// s-children) in depth-first order; a chain is a decision chain when its
/// root has s-children.
struct Chain {
  std::string id;  // the root node's id
  NodeId root;
  std::vector<NodeId> members;  // sorted; excludes the global root
  std::vector<NodeId> alphabet;
  bool decision = false;

  friend bool operator==(const Chain&, const Chain&) = default;
};

struct ChainIndex {
  std::vector<Chain> chains;                                 // sorted by id
  std::map<NodeId, std::optional<std::size_t>> enclosing;   // nu; nullopt only at the global root
  std::vector<std::optional<std::size_t>> nesting_parent;   // rho; nullopt is the sentinel

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = std::lower_bound(chains.begin(), chains.end(), id,
                               [](const Chain& c, const std::string& k) { return c.id < k; });
    if (it == chains.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - chains.begin());
  }

  std::size_t index_of(const std::string& id) const {
    if (auto i = find(id)) return *i;
    throw Error("unknown chain " + id);
  }

  std::optional<std::size_t> chain_of(const NodeId& v) const {
    auto it = enclosing.find(v);
    if (it == enclosing.end()) throw Error("unknown node " + v);
    return it->second;
  }

  friend bool operator==(const ChainIndex&, const ChainIndex&) = default;
};

/// Cuts the tree at every c-node below the root. When the global root itself
/// has s-children they form a chain rooted at the global root, which keeps
/// its sentinel enclosing value.
inline ChainIndex extract_chains(const FactoredTree& t) {
  std::vector<NodeId> roots;
  if (t.is_decision(t.root)) roots.push_back(t.root);
  for (const auto& v : t.nodes)
    if (v != t.root && t.edge_type.at(v) == EdgeType::characterized_by) roots.push_back(v);
  std::sort(roots.begin(), roots.end());

  ChainIndex ci;
  ci.enclosing[t.root] = std::nullopt;
  for (std::size_t k = 0; k < roots.size(); ++k) {
    Chain c;
    c.id = roots[k];
    c.root = roots[k];
    c.decision = t.is_decision(c.root);
    // Depth-first over s-edges only.
    std::vector<NodeId> stack{c.root};
    while (!stack.empty()) {
      NodeId u = std::move(stack.back());
      stack.pop_back();
      if (u != t.root) {
        c.members.push_back(u);
        ci.enclosing[u] = k;
      }
      if (t.is_decision(u)) {
        const auto& ch = t.children_of(u);
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
      } else {
        c.alphabet.push_back(u);
      }
    }
    std::sort(c.members.begin(), c.members.end());
    ci.chains.push_back(std::move(c));
  }

  ci.nesting_parent.resize(ci.chains.size());
  for (std::size_t k = 0; k < ci.chains.size(); ++k) {
    const auto p = t.parent_of(ci.chains[k].root);
    ci.nesting_parent[k] = p ? ci.enclosing.at(*p) : std::nullopt;
  }
  return ci;
}

}  // namespace graft
