#pragma once

// Raw attribute knowledge DAG: nodes with optional hints, typed edges,
// optional canonical-parent annotations and cross-rules.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "graft/error.hpp"

namespace graft {

using NodeId = std::string;

/// characterized_by ("c", all of these apply) or subdivides_in ("s", pick one).
enum class EdgeType { characterized_by, subdivides_in };

enum class Effect { force, zero_out };

inline std::string_view to_string(EdgeType t) {
  return t == EdgeType::characterized_by ? "c" : "s";
}

inline std::string_view to_string(Effect e) {
  return e == Effect::force ? "force" : "zero_out";
}

struct NodeDecl {
  NodeId id;
  std::optional<std::string> hint;

  friend bool operator==(const NodeDecl&, const NodeDecl&) = default;
};

struct Edge {
  NodeId parent;
  NodeId child;
  EdgeType type = EdgeType::characterized_by;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Cross-rule: when every trigger value is picked, apply `effect` with the
/// target slice to the chain holding the targets.
struct Rule {
  std::string hint;
  std::vector<NodeId> trigger;
  std::vector<NodeId> target;
  Effect effect = Effect::force;

  friend bool operator==(const Rule&, const Rule&) = default;
};

struct KnowledgeGraph {
  NodeId root;
  std::vector<NodeDecl> nodes;
  std::vector<Edge> edges;
  std::map<NodeId, NodeId> canonical_parent;
  std::vector<Rule> rules;

  bool has_node(std::string_view id) const {
    return std::any_of(nodes.begin(), nodes.end(), [&](const NodeDecl& n) { return n.id == id; });
  }

  const NodeDecl* find_node(std::string_view id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;
};

struct Violation {
  enum class Kind {
    duplicate_node,
    unknown_node,
    missing_root,
    duplicate_edge,
    self_loop,
    root_has_parent,
    cycle,
    unreachable,
    mixed_children,
    bad_canonical_parent,
    bad_rule,
  };

  Kind kind;
  std::string subject;  // offending node, edge or rule
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  bool has(Violation::Kind k) const {
    return std::any_of(violations.begin(), violations.end(),
                       [k](const Violation& v) { return v.kind == k; });
  }
};

namespace detail {

/// Child lists keyed by parent, each sorted by (child id, type) for determinism.
inline std::map<NodeId, std::vector<const Edge*>> out_edges(const KnowledgeGraph& g) {
  std::map<NodeId, std::vector<const Edge*>> out;
  for (const auto& e : g.edges) out[e.parent].push_back(&e);
  for (auto& [_, list] : out)
    std::sort(list.begin(), list.end(), [](const Edge* a, const Edge* b) {
      return std::tie(a->child, a->type) < std::tie(b->child, b->type);
    });
  return out;
}

inline std::string edge_label(const Edge& e) {
  return e.parent + " -" + std::string(to_string(e.type)) + "-> " + e.child;
}

}  // namespace detail

/// Checks every structural invariant of the knowledge graph. Never throws;
/// each breach becomes one report entry naming the offending element.
inline ValidationReport validate_graph(const KnowledgeGraph& g) {
  using K = Violation::Kind;
  ValidationReport report;
  auto add = [&](K k, std::string subject, std::string msg) {
    report.violations.push_back({k, std::move(subject), std::move(msg)});
  };

  std::set<NodeId> ids;
  for (const auto& n : g.nodes) {
    if (n.id.empty()) add(K::unknown_node, n.id, "empty node id");
    if (!ids.insert(n.id).second) add(K::duplicate_node, n.id, "duplicate node " + n.id);
  }
  if (!ids.count(g.root)) add(K::missing_root, g.root, "root " + g.root + " is not a declared node");

  std::set<std::pair<NodeId, NodeId>> seen_pairs;
  for (const auto& e : g.edges) {
    for (const NodeId* end : {&e.parent, &e.child})
      if (!ids.count(*end)) add(K::unknown_node, *end, "unknown NodeId " + *end + " in edge " + detail::edge_label(e));
    if (e.parent == e.child) add(K::self_loop, e.parent, "self loop at " + e.parent);
    if (!seen_pairs.emplace(e.parent, e.child).second)
      add(K::duplicate_edge, detail::edge_label(e), "duplicate edge " + e.parent + " -> " + e.child);
    if (e.child == g.root) add(K::root_has_parent, g.root, "root " + g.root + " has incoming edge from " + e.parent);
  }

  const auto out = detail::out_edges(g);

  // Uniform children: all outgoing edges of a node share one type.
  for (const auto& [parent, list] : out) {
    const bool mixed = std::any_of(list.begin(), list.end(),
                                   [&](const Edge* e) { return e->type != list.front()->type; });
    if (mixed) add(K::mixed_children, parent, "mixed children at " + parent);
  }

  // Directed cycles: iterative three-colour DFS, one entry per back edge.
  {
    enum Colour : char { white, grey, black };
    std::map<NodeId, Colour> colour;
    for (const auto& id : ids) colour[id] = white;
    std::set<NodeId> reported;
    for (const auto& start : ids) {
      if (colour[start] != white) continue;
      std::vector<std::pair<NodeId, std::size_t>> stack{{start, 0}};
      colour[start] = grey;
      while (!stack.empty()) {
        auto& [node, next] = stack.back();
        auto it = out.find(node);
        if (it == out.end() || next >= it->second.size()) {
          colour[node] = black;
          stack.pop_back();
          continue;
        }
        const NodeId& child = it->second[next++]->child;
        auto c = colour.find(child);
        if (c == colour.end()) continue;  // unknown node, reported above
        if (c->second == grey) {
          if (reported.insert(child).second) add(K::cycle, child, "cycle through " + child);
        } else if (c->second == white) {
          c->second = grey;
          stack.emplace_back(child, 0);
        }
      }
    }
  }

  // Reachability from the root.
  if (ids.count(g.root)) {
    std::set<NodeId> reached{g.root};
    std::vector<NodeId> todo{g.root};
    while (!todo.empty()) {
      NodeId u = std::move(todo.back());
      todo.pop_back();
      if (auto it = out.find(u); it != out.end())
        for (const Edge* e : it->second)
          if (reached.insert(e->child).second) todo.push_back(e->child);
    }
    for (const auto& id : ids)
      if (!reached.count(id)) add(K::unreachable, id, "unreachable node " + id);
  }

  for (const auto& [child, parent] : g.canonical_parent) {
    const bool is_edge = std::any_of(g.edges.begin(), g.edges.end(), [&](const Edge& e) {
      return e.parent == parent && e.child == child;
    });
    if (!is_edge)
      add(K::bad_canonical_parent, child,
          "canonical parent " + parent + " of " + child + " is not an incoming edge");
  }

  for (std::size_t i = 0; i < g.rules.size(); ++i) {
    const Rule& r = g.rules[i];
    const std::string name = "rule " + std::to_string(i) + (r.hint.empty() ? "" : " (" + r.hint + ")");
    if (r.trigger.empty()) add(K::bad_rule, name, name + " has an empty trigger");
    if (r.target.empty()) add(K::bad_rule, name, name + " has an empty target");
    for (const auto* list : {&r.trigger, &r.target})
      for (const auto& id : *list)
        if (!ids.count(id)) add(K::unknown_node, id, "unknown NodeId " + id + " in " + name);
  }

  return report;
}

}  // namespace graft
