#pragma once

// The compiled substrate: tree, chains, dependency graph, levels and the
// rule set resolved against chain alphabets.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "graft/dependency.hpp"
#include "graft/row.hpp"

namespace graft {

struct ResolvedRule {
  std::size_t index = 0;       // position in the source rule list
  std::size_t chain = 0;       // affected chain
  std::set<NodeId> slice;      // target slice expressed as alphabet members
  std::vector<NodeId> triggers;
  bool inert = false;          // a trigger sits on the affected chain: never fires
  // Per trigger: its chain and, per alphabet index of that chain, whether
  // picking that member selects the trigger node.
  std::vector<std::pair<std::size_t, std::vector<char>>> trigger_mask;

  friend bool operator==(const ResolvedRule&, const ResolvedRule&) = default;
};

struct Footprint {
  std::uint64_t joint = 0;     // product of decision-chain alphabet sizes (saturating)
  std::uint64_t factored = 0;  // sum of decision-chain alphabet sizes plus rule count

  friend bool operator==(const Footprint&, const Footprint&) = default;
};

struct Substrate {
  KnowledgeGraph graph;
  FactoredTree tree;
  ChainIndex chains;
  DependencyGraph deps;
  LevelMap levels;
  std::vector<ResolvedRule> rules;
  std::vector<std::size_t> order;  // sampling order, see sampling_order
  std::string version;             // tree + rule content hash

  // Lookups derived by build_substrate.
  std::vector<std::optional<std::pair<std::size_t, std::size_t>>> gate;  // (parent chain, alphabet index) opening chain k
  std::vector<std::vector<std::vector<NodeId>>> paths;                 // [chain][alphabet index] root to terminal
  std::vector<std::map<NodeId, std::size_t>> alphabet_index;

  std::optional<std::size_t> pick_index(std::size_t k, const NodeId& v) const {
    const auto& idx = alphabet_index.at(k);
    auto it = idx.find(v);
    if (it == idx.end()) return std::nullopt;
    return it->second;
  }

  const Chain& chain(std::size_t k) const { return chains.chains.at(k); }
  std::size_t chain_count() const { return chains.chains.size(); }

  /// Node whose selection opens chain k, nullopt for top-level chains.
  std::optional<NodeId> activator(std::size_t k) const {
    if (!chains.nesting_parent.at(k)) return std::nullopt;
    return tree.parent_of(chain(k).root);
  }

  /// Nodes from the chain root down to `terminal`, inclusive.
  std::vector<NodeId> chain_path(std::size_t k, const NodeId& terminal) const {
    const NodeId& root = chain(k).root;
    std::vector<NodeId> path{terminal};
    while (path.back() != root) {
      auto p = tree.parent_of(path.back());
      if (!p) throw Error(terminal + " is not below chain root " + root);
      path.push_back(*p);
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  Footprint footprint() const {
    Footprint f{1, rules.size()};
    for (const auto& c : chains.chains) {
      if (!c.decision) continue;
      const std::uint64_t a = c.alphabet.size();
      f.factored += a;
      f.joint = f.joint > std::numeric_limits<std::uint64_t>::max() / a
                    ? std::numeric_limits<std::uint64_t>::max()
                    : f.joint * a;
    }
    return f;
  }

  friend bool operator==(const Substrate&, const Substrate&) = default;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string tree_version(const FactoredTree& t, const std::vector<Rule>& rules) {
  std::string text = "root\t" + t.root + "\n";
  for (const auto& v : t.nodes) {
    if (v == t.root) continue;
    text += t.parent.at(v) + "\t" + std::string(to_string(t.edge_type.at(v))) + "\t" + v + "\n";
  }
  for (const auto& r : rules) {
    text += "rule\t" + std::string(to_string(r.effect)) + "\t" + r.hint;
    for (const auto& x : r.trigger) text += "\tt:" + x;
    for (const auto& x : r.target) text += "\tg:" + x;
    text += "\n";
  }
  return hex64(fnv1a(text));
}

inline ProbabilityRow uniform_chain_distribution(const Substrate& s, std::size_t k) {
  const Chain& c = s.chain(k);
  ProbabilityRow row;
  row.options = c.alphabet;
  for (const auto& a : c.alphabet) {
    double m = 1.0;
    const auto path = s.chain_path(k, a);
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      m /= static_cast<double>(s.tree.children_of(path[i]).size());
    row.mass.push_back(m);
  }
  return row;
}

/// Decision-node choices forced by picking `v`: every s-node on the root path
/// must select the on-path child.
inline void path_requirements(const FactoredTree& t, const NodeId& v, std::map<NodeId, NodeId>& req,
                              bool& conflict) {
  NodeId cur = v;
  while (auto p = t.parent_of(cur)) {
    if (t.edge_type.at(cur) == EdgeType::subdivides_in) {
      auto [it, inserted] = req.emplace(*p, cur);
      if (!inserted && it->second != cur) conflict = true;
    }
    cur = *p;
  }
}

// Every set of rules on one chain whose triggers can hold together must leave
// non-empty support on the uniform prior.
inline void check_rule_support(const Substrate& s) {
  std::vector<std::vector<const ResolvedRule*>> by_chain(s.chain_count());
  for (const auto& r : s.rules)
    if (!r.inert) by_chain[r.chain].push_back(&r);

  for (std::size_t k = 0; k < by_chain.size(); ++k) {
    const auto& rules = by_chain[k];
    if (rules.empty()) continue;
    const std::size_t max_depth = rules.size() > 16 ? 2 : rules.size();
    const ProbabilityRow base = uniform_chain_distribution(s, k);

    std::vector<const ResolvedRule*> chosen;
    auto visit = [&](auto& self, std::size_t from, const std::map<NodeId, NodeId>& req,
                     const ProbabilityRow& dist) -> void {
      if (chosen.size() >= max_depth) return;
      for (std::size_t i = from; i < rules.size(); ++i) {
        auto next_req = req;
        bool conflict = false;
        for (const auto& t : rules[i]->triggers) path_requirements(s.tree, t, next_req, conflict);
        if (conflict) continue;
        chosen.push_back(rules[i]);
        ProbabilityRow next;
        try {
          next = apply_effect(s.graph.rules[rules[i]->index].effect, dist, rules[i]->slice);
        } catch (const EmptySupportError&) {
          std::string names;
          for (const auto* r : chosen)
            names += (names.empty() ? "" : ", ") + rule_name(s.graph.rules[r->index], r->index);
          throw BuildError("rules", names + " leave empty support on chain " + s.chain(k).id);
        }
        self(self, i + 1, next_req, next);
        chosen.pop_back();
      }
    };
    visit(visit, 0, {}, base);
  }
}

}  // namespace detail

/// Build pipeline: reduce, extract chains, expand rules, certify acyclicity,
/// assign levels, then validate every rule's support. Errors carry the stage.
inline Substrate build_substrate(const KnowledgeGraph& g) {
  Substrate s;
  s.graph = g;
  s.tree = reduce_to_tree(g);
  s.chains = extract_chains(s.tree);
  s.deps = expand_rules(s.chains, g.rules);
  if (auto witness = check_acyclic(s.deps)) {
    std::vector<std::string> ids;
    for (auto k : *witness) ids.push_back(s.chains.chains[k].id);
    throw CycleError(std::move(ids));
  }
  std::vector<bool> passthrough;
  for (const auto& c : s.chains.chains) passthrough.push_back(!c.decision);
  s.levels = assign_levels(s.deps, passthrough);

  for (std::size_t i = 0; i < g.rules.size(); ++i) {
    const Rule& rule = g.rules[i];
    ResolvedRule r;
    r.index = i;
    r.chain = target_chain(s.chains, rule, i);
    const Chain& c = s.chain(r.chain);
    if (!c.decision)
      throw BuildError("rules", detail::rule_name(rule, i) + " targets chain " + c.id + " which has no decision");
    for (const auto& g_node : rule.target) {
      if (g_node == c.root)
        throw BuildError("rules", detail::rule_name(rule, i) + " targets chain root " + c.root);
      for (const auto& a : c.alphabet)
        if (s.tree.is_ancestor_or_self(g_node, a)) r.slice.insert(a);
    }
    r.triggers = rule.trigger;
    r.inert = std::any_of(rule.trigger.begin(), rule.trigger.end(),
                          [&](const NodeId& t) { return s.chains.chain_of(t) == r.chain; });
    s.rules.push_back(std::move(r));
  }

  s.gate.resize(s.chain_count());
  s.paths.resize(s.chain_count());
  s.alphabet_index.resize(s.chain_count());
  for (std::size_t k = 0; k < s.chain_count(); ++k) {
    const Chain& c = s.chain(k);
    for (std::size_t a = 0; a < c.alphabet.size(); ++a) {
      s.alphabet_index[k][c.alphabet[a]] = a;
      s.paths[k].push_back(s.chain_path(k, c.alphabet[a]));
    }
  }
  for (std::size_t k = 0; k < s.chain_count(); ++k)
    if (const auto rho = s.chains.nesting_parent[k])
      s.gate[k] = std::make_pair(*rho, s.alphabet_index[*rho].at(*s.activator(k)));
  for (auto& r : s.rules) {
    for (const auto& t : r.triggers) {
      const std::size_t c = *s.chains.chain_of(t);
      std::vector<char> mask;
      for (const auto& a : s.chain(c).alphabet) mask.push_back(s.tree.is_ancestor_or_self(t, a) ? 1 : 0);
      r.trigger_mask.emplace_back(c, std::move(mask));
    }
  }

  s.order = sampling_order(s.deps, s.levels);

  s.version = detail::tree_version(s.tree, g.rules);
  detail::check_rule_support(s);
  return s;
}

}  // namespace graft
