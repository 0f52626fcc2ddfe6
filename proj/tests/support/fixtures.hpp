#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graft/distribution.hpp"
#include "graft/rng.hpp"

namespace graft::testing {

inline constexpr EdgeType kC = EdgeType::characterized_by;
inline constexpr EdgeType kS = EdgeType::subdivides_in;

/// Builder for small graphs in tests.
struct GraphBuilder {
  KnowledgeGraph g;

  explicit GraphBuilder(NodeId root) {
    g.root = root;
    g.nodes.push_back({root, std::nullopt});
  }

  GraphBuilder& node(const NodeId& id) {
    if (!g.has_node(id)) g.nodes.push_back({id, std::nullopt});
    return *this;
  }

  GraphBuilder& c(const NodeId& parent, const NodeId& child) { return edge(parent, child, kC); }
  GraphBuilder& s(const NodeId& parent, const NodeId& child) { return edge(parent, child, kS); }

  GraphBuilder& edge(const NodeId& parent, const NodeId& child, EdgeType t) {
    node(parent).node(child);
    g.edges.push_back({parent, child, t});
    return *this;
  }

  GraphBuilder& rule(std::vector<NodeId> trigger, std::vector<NodeId> target, Effect e, std::string hint = {}) {
    g.rules.push_back({std::move(hint), std::move(trigger), std::move(target), e});
    return *this;
  }

  KnowledgeGraph build() const { return g; }
};

inline KnowledgeGraph morning_graph() {
  return GraphBuilder("morning")
      .c("morning", "breakfast")
      .c("morning", "clothes")
      .c("morning", "transport")
      .c("clothes", "style")
      .c("clothes", "helmet")
      .s("breakfast", "breakfast_yes")
      .s("breakfast", "breakfast_no")
      .s("transport", "bike")
      .s("transport", "car")
      .s("style", "casual")
      .s("style", "formal")
      .s("helmet", "helmet_yes")
      .s("helmet", "helmet_no")
      .rule({"bike"}, {"helmet_yes"}, Effect::force, "bike needs helmet")
      .build();
}

inline MethodTuple tuple(std::initializer_list<std::pair<const char*, const char*>> picks) {
  MethodTuple m;
  for (const auto& [c, v] : picks) m.picks[c] = v ? std::optional<NodeId>(v) : std::nullopt;
  return m;
}

/// Random substrate: up to `max_chains` decision chains with at most
/// `max_options` terminals each, some nested under options of earlier
/// chains, some behind pass-through c-nodes, plus up to `max_rules` rules.
/// Draws are repeated until the graph builds.
struct RandomSubstrate {
  Substrate substrate;
  PolicyRows rows;
};

inline RandomSubstrate random_substrate(std::uint64_t seed, std::size_t max_chains = 5, std::size_t max_options = 4,
                                        std::size_t max_rules = 3) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    GraphBuilder b("r");
    std::vector<NodeId> anchors{"r"};     // where a new chain may hang
    std::vector<NodeId> s_nodes;          // candidate trigger / target nodes
    std::vector<std::vector<NodeId>> chain_s_nodes;
    const std::size_t n_chains = 1 + rng.index(max_chains);
    for (std::size_t k = 0; k < n_chains; ++k) {
      const NodeId root = "c" + std::to_string(k);
      NodeId anchor = anchors[rng.index(anchors.size())];
      if (rng.bernoulli(0.2)) {
        const NodeId pass = "g" + std::to_string(k);
        b.c(anchor, pass);
        anchor = pass;
      }
      b.c(anchor, root);
      std::vector<NodeId> mine;
      const std::size_t n_terminals = 2 + rng.index(max_options - 1);
      if (n_terminals >= 3 && rng.bernoulli(0.4)) {
        // two-step chain: one option subdivided further
        const std::size_t top = n_terminals - 1;
        for (std::size_t i = 0; i < top; ++i) {
          const NodeId o = root + "_" + std::to_string(i);
          b.s(root, o);
          mine.push_back(o);
        }
        const NodeId split = mine.front();
        for (std::size_t i = 0; i < 2; ++i) {
          const NodeId o = split + "_" + std::to_string(i);
          b.s(split, o);
          mine.push_back(o);
        }
      } else {
        for (std::size_t i = 0; i < n_terminals; ++i) {
          const NodeId o = root + "_" + std::to_string(i);
          b.s(root, o);
          mine.push_back(o);
        }
      }
      for (const auto& o : mine) {
        s_nodes.push_back(o);
        if (b.g.edges.end() == std::find_if(b.g.edges.begin(), b.g.edges.end(),
                                            [&](const Edge& e) { return e.parent == o; }))
          anchors.push_back(o);
      }
      chain_s_nodes.push_back(std::move(mine));
    }
    const std::size_t n_rules = rng.index(max_rules + 1);
    for (std::size_t i = 0; i < n_rules; ++i) {
      const std::size_t target_chain = rng.index(n_chains);
      const auto& tc = chain_s_nodes[target_chain];
      std::vector<NodeId> target{tc[rng.index(tc.size())]};
      if (rng.bernoulli(0.3)) {
        const NodeId extra = tc[rng.index(tc.size())];
        if (extra != target.front()) target.push_back(extra);
      }
      std::vector<NodeId> trigger{s_nodes[rng.index(s_nodes.size())]};
      if (rng.bernoulli(0.3)) {
        const NodeId extra = s_nodes[rng.index(s_nodes.size())];
        if (extra != trigger.front()) trigger.push_back(extra);
      }
      b.rule(trigger, target, rng.bernoulli(0.5) ? Effect::force : Effect::zero_out, "r" + std::to_string(i));
    }
    KnowledgeGraph g = b.build();
    // Cyclic rule sets and rules that empty a chain are redrawn.
    try {
      RandomSubstrate out{build_substrate(g), {}};
      out.rows = uniform_rows(out.substrate);
      for (auto& [u, row] : out.rows.rows) {
        double total = 0.0;
        for (auto& m : row.mass) total += (m = 0.05 + rng.next_double());
        for (auto& m : row.mass) m /= total;
      }
      return out;
    } catch (const Error&) {
      continue;
    }
  }
}

/// Random tree for embedding tests: every internal node picks one child
/// type; depth <= max_depth, size <= max_nodes.
inline FactoredTree random_tree(std::uint64_t seed, std::size_t max_depth = 7, std::size_t max_nodes = 300,
                                std::size_t max_branch = 3) {
  Rng rng(seed);
  GraphBuilder b("n0");
  std::size_t count = 1;
  std::vector<std::pair<NodeId, std::size_t>> frontier{{"n0", 0}};
  for (std::size_t i = 0; i < frontier.size() && count < max_nodes; ++i) {
    const auto [v, d] = frontier[i];
    if (d >= max_depth) continue;
    if (d > 0 && rng.bernoulli(0.25)) continue;  // leaf
    const std::size_t n = 1 + rng.index(max_branch);
    const EdgeType t = rng.bernoulli(0.5) ? kC : kS;
    for (std::size_t j = 0; j < n && count < max_nodes; ++j) {
      const NodeId child = "n" + std::to_string(count++);
      b.edge(v, child, t);
      frontier.push_back({child, d + 1});
    }
  }
  return reduce_to_tree(b.build());
}

}  // namespace graft::testing
