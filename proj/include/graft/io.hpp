#pragma once

// JSON file formats for every persisted artifact. Each document carries
// `format_version` and `kind`; artifacts tied to a tree carry its version.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graft/landscape.hpp"
#include "graft/loop.hpp"

namespace graft::io {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Shortest text with 17 significant digits that keeps a decimal point.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("cannot write " + path);
}

inline json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(what + ": missing field '" + key + "'");
  return j.at(key);
}

template <class T>
T get(const json& j, const char* key, const std::string& what) {
  try {
    return field(j, key, what).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(what + ": field '" + key + "': " + e.what());
  }
}

inline void expect_kind(const json& j, const char* kind, const std::string& what) {
  if (j.contains("kind") && j.at("kind") != kind)
    throw ParseError(what + ": expected a " + kind + " document, found " + j.at("kind").dump());
  if (j.contains("format_version") && j.at("format_version") != kFormatVersion)
    throw VersionError(what + ": unsupported format_version " + j.at("format_version").dump());
}

inline json header(const char* kind) { return json{{"format_version", kFormatVersion}, {"kind", kind}}; }

}  // namespace detail

// ---- knowledge graph ------------------------------------------------------

inline json to_json(const KnowledgeGraph& g) {
  json j = detail::header("graph");
  j["root"] = g.root;
  j["nodes"] = json::array();
  for (const auto& n : g.nodes) {
    json node{{"id", n.id}};
    if (n.hint) node["hint"] = *n.hint;
    j["nodes"].push_back(node);
  }
  j["edges"] = json::array();
  for (const auto& e : g.edges)
    j["edges"].push_back({{"parent", e.parent}, {"child", e.child}, {"type", std::string(to_string(e.type))}});
  if (!g.canonical_parent.empty()) j["canonical_parent"] = g.canonical_parent;
  j["rules"] = json::array();
  for (const auto& r : g.rules)
    j["rules"].push_back({{"hint", r.hint},
                          {"trigger", r.trigger},
                          {"target", r.target},
                          {"effect", std::string(to_string(r.effect))}});
  return j;
}

inline KnowledgeGraph graph_from_json(const json& j, const std::string& what = "graph") {
  detail::expect_kind(j, "graph", what);
  KnowledgeGraph g;
  g.root = detail::get<std::string>(j, "root", what);
  for (const auto& n : detail::field(j, "nodes", what)) {
    if (n.is_string()) {
      g.nodes.push_back({n.get<std::string>(), std::nullopt});
      continue;
    }
    NodeDecl d{detail::get<std::string>(n, "id", what), std::nullopt};
    if (n.contains("hint")) d.hint = detail::get<std::string>(n, "hint", what);
    g.nodes.push_back(std::move(d));
  }
  if (j.contains("edges"))
    for (const auto& e : j.at("edges")) {
      const auto type = detail::get<std::string>(e, "type", what);
      if (type != "c" && type != "s") throw ParseError(what + ": edge type must be \"c\" or \"s\", got " + type);
      g.edges.push_back({detail::get<std::string>(e, "parent", what), detail::get<std::string>(e, "child", what),
                         type == "c" ? EdgeType::characterized_by : EdgeType::subdivides_in});
    }
  if (j.contains("canonical_parent"))
    g.canonical_parent = detail::get<std::map<std::string, std::string>>(j, "canonical_parent", what);
  if (j.contains("rules"))
    for (const auto& r : j.at("rules")) {
      Rule rule;
      if (r.contains("hint")) rule.hint = detail::get<std::string>(r, "hint", what);
      rule.trigger = detail::get<std::vector<std::string>>(r, "trigger", what);
      rule.target = detail::get<std::vector<std::string>>(r, "target", what);
      const auto effect = detail::get<std::string>(r, "effect", what);
      if (effect == "force") {
        rule.effect = Effect::force;
      } else if (effect == "zero_out") {
        rule.effect = Effect::zero_out;
      } else {
        throw ParseError(what + ": rule effect must be \"force\" or \"zero_out\", got " + effect);
      }
      g.rules.push_back(std::move(rule));
    }
  return g;
}

inline KnowledgeGraph load_graph(const std::string& path) { return graph_from_json(parse(read_text(path), path), path); }

inline json to_json(const FactoredTree& t) {
  json j = detail::header("tree");
  j["root"] = t.root;
  j["edges"] = json::array();
  for (const auto& v : t.nodes)
    if (auto p = t.parent_of(v))
      j["edges"].push_back({{"parent", *p}, {"child", v}, {"type", std::string(to_string(t.edge_type.at(v)))}});
  return j;
}

// ---- substrate --------------------------------------------------------------

inline json derived_json(const Substrate& s) {
  json chains = json::array();
  for (std::size_t k = 0; k < s.chain_count(); ++k) {
    const Chain& c = s.chain(k);
    json jc{{"id", c.id}, {"alphabet", c.alphabet}, {"decision", c.decision}, {"level", s.levels[k]}};
    jc["nesting_parent"] = s.chains.nesting_parent[k] ? json(s.chain(*s.chains.nesting_parent[k]).id) : json();
    chains.push_back(std::move(jc));
  }
  json edges = json::array();
  for (const auto& [a, b] : s.deps.rule_edges) edges.push_back({s.chain(a).id, s.chain(b).id});
  json order = json::array();
  for (auto k : s.order) order.push_back(s.chain(k).id);
  json rules = json::array();
  for (const auto& r : s.rules)
    rules.push_back({{"index", r.index}, {"chain", s.chain(r.chain).id}, {"slice", r.slice}, {"inert", r.inert}});
  const auto fp = s.footprint();
  return {{"tree", to_json(s.tree)["edges"]},
          {"chains", chains},
          {"rule_edges", edges},
          {"order", order},
          {"rules", rules},
          {"footprint", {{"joint", fp.joint}, {"factored", fp.factored}}}};
}

inline std::string content_hash(const json& graph, const json& derived) {
  return graft::detail::hex64(graft::detail::fnv1a(derived.dump(), graft::detail::fnv1a(graph.dump())));
}

inline json to_json(const Substrate& s) {
  json j = detail::header("substrate");
  j["version"] = s.version;
  j["graph"] = to_json(s.graph);
  j["derived"] = derived_json(s);
  j["content_hash"] = content_hash(j["graph"], j["derived"]);
  return j;
}

/// Rebuilds from the stored graph and refuses files whose derived data or
/// hash disagree with the rebuild.
inline Substrate substrate_from_json(const json& j, const std::string& what = "substrate") {
  detail::expect_kind(j, "substrate", what);
  Substrate s = build_substrate(graph_from_json(detail::field(j, "graph", what), what));
  if (detail::get<std::string>(j, "version", what) != s.version)
    throw VersionError(what + ": stored version does not match the rebuilt tree");
  const json derived = derived_json(s);
  if (detail::field(j, "derived", what) != derived) throw VersionError(what + ": derived data drifted from the graph");
  if (detail::get<std::string>(j, "content_hash", what) != content_hash(j.at("graph"), derived))
    throw VersionError(what + ": content hash mismatch");
  return s;
}

inline Substrate load_substrate(const std::string& path) {
  return substrate_from_json(parse(read_text(path), path), path);
}

// ---- rows, methods, fingerprints, embeddings ---------------------------------

inline json to_json(const PolicyRows& r) {
  json j = detail::header("rows");
  j["tree_version"] = r.tree_version;
  j["rows"] = json::object();
  for (const auto& [u, row] : r.rows) j["rows"][u] = {{"options", row.options}, {"mass", row.mass}};
  return j;
}

inline PolicyRows rows_from_json(const json& j, const std::string& what = "rows") {
  detail::expect_kind(j, "rows", what);
  PolicyRows r;
  r.tree_version = detail::get<std::string>(j, "tree_version", what);
  for (const auto& [u, row] : detail::field(j, "rows", what).items())
    r.rows[u] = {detail::get<std::vector<std::string>>(row, "options", what),
                 detail::get<std::vector<double>>(row, "mass", what)};
  return r;
}

inline json picks_json(const MethodTuple& m) {
  json p = json::object();
  for (const auto& [c, v] : m.picks) p[c] = v ? json(*v) : json();
  return p;
}

inline MethodTuple picks_from_json(const json& p, const std::string& what) {
  if (!p.is_object()) throw ParseError(what + ": picks must be an object");
  MethodTuple m;
  for (const auto& [c, v] : p.items()) {
    if (v.is_null()) {
      m.picks[c] = std::nullopt;
    } else if (v.is_string()) {
      m.picks[c] = v.get<std::string>();
    } else {
      throw ParseError(what + ": pick for " + c + " must be a node id or null");
    }
  }
  return m;
}

inline json to_json(const MethodTuple& m, const std::string& tree_version) {
  json j = detail::header("method");
  j["tree_version"] = tree_version;
  j["picks"] = picks_json(m);
  return j;
}

inline MethodTuple method_from_json(const json& j, const std::string& what = "method") {
  detail::expect_kind(j, "method", what);
  return picks_from_json(detail::field(j, "picks", what), what);
}

inline json to_json(const Fingerprint& f) {
  json j = detail::header("fingerprint");
  j["tree_tag"] = f.tree_tag;
  j["K"] = f.K;
  j["keep"] = std::string(to_string(f.keep));
  j["cells"] = json::array();
  for (const auto& c : f.cells) j["cells"].push_back({c.i, c.j, c.d});
  return j;
}

inline KeepPolicy keep_from_string(const std::string& s) {
  if (s == "s") return KeepPolicy::s_only;
  if (s == "all") return KeepPolicy::all_nodes;
  throw ParseError("keep policy must be \"s\" or \"all\", got " + s);
}

inline Fingerprint fingerprint_from_json(const json& j, const std::string& what = "fingerprint") {
  detail::expect_kind(j, "fingerprint", what);
  Fingerprint f;
  f.tree_tag = detail::get<std::string>(j, "tree_tag", what);
  f.K = detail::get<int>(j, "K", what);
  f.keep = keep_from_string(detail::get<std::string>(j, "keep", what));
  for (const auto& c : detail::get<std::vector<std::vector<int>>>(j, "cells", what)) {
    if (c.size() != 3) throw ParseError(what + ": a cell is an (i, j, depth) triple");
    f.cells.insert({c[0], c[1], c[2]});
  }
  return f;
}

inline Fingerprint load_fingerprint(const std::string& path) {
  return fingerprint_from_json(parse(read_text(path), path), path);
}

inline json to_json(const Embedding& e, int k_star) {
  json j = detail::header("embedding");
  j["tree_version"] = e.tree_version;
  j["D"] = e.max_depth;
  j["K_star"] = k_star;
  j["nodes"] = json::object();
  for (const auto& [v, p] : e.position) {
    const Rect& r = e.rect.at(v);
    j["nodes"][v] = {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"depth", e.depth.at(v)}, {"rect", {r.x0, r.x1, r.y0, r.y1}}};
  }
  return j;
}

// ---- memory -------------------------------------------------------------------

inline json to_json(const MemoryEntry& e) {
  json j = detail::header("memory_entry");
  j["problem_tag"] = e.problem_fp.tree_tag;
  j["action_version"] = e.action_version;
  j["problem_fp"] = to_json(e.problem_fp);
  j["method"] = picks_json(e.method);
  j["path"] = e.method_path_nodes;
  j["observables"] = e.observables;
  j["reward"] = e.reward;
  j["stale"] = e.stale;
  return j;
}

inline MemoryEntry memory_entry_from_json(const json& j, const std::string& what) {
  detail::expect_kind(j, "memory_entry", what);
  MemoryEntry e;
  e.problem_fp = fingerprint_from_json(detail::field(j, "problem_fp", what), what);
  e.action_version = detail::get<std::string>(j, "action_version", what);
  e.method = picks_from_json(detail::field(j, "method", what), what);
  e.method_path_nodes = detail::get<std::set<std::string>>(j, "path", what);
  e.observables = detail::get<Observables>(j, "observables", what);
  e.reward = detail::get<double>(j, "reward", what);
  if (j.contains("stale")) e.stale = detail::get<bool>(j, "stale", what);
  if (!(e.reward >= 0.0 && e.reward <= kRewardMax)) throw ParseError(what + ": reward outside [0, 100]");
  return e;
}

inline std::string memory_line(const MemoryEntry& e) { return to_json(e).dump() + "\n"; }

/// One record per line. The repository takes its problem tag from the
/// entries (which must agree) and its action version from the last entry.
/// A missing file is an empty repository.
inline MemoryRepository load_memory(const std::string& path) {
  MemoryRepository repo;
  std::ifstream in(path, std::ios::binary);
  if (!in) return repo;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string what = path + ":" + std::to_string(n);
    MemoryEntry e = memory_entry_from_json(parse(line, what), what);
    if (repo.entries.empty()) {
      repo.problem_tag = e.problem_fp.tree_tag;
    } else if (e.problem_fp.tree_tag != repo.problem_tag) {
      throw VersionError(what + ": entry is for problem tree " + e.problem_fp.tree_tag + ", earlier entries use " +
                         repo.problem_tag);
    }
    repo.action_version = e.action_version;
    repo.entries.push_back(std::move(e));
  }
  return repo;
}

inline std::string memory_text(const MemoryRepository& repo) {
  std::string out;
  for (const auto& e : repo.entries) out += memory_line(e);
  return out;
}

inline void save_memory(const std::string& path, const MemoryRepository& repo) { write_text(path, memory_text(repo)); }

// ---- environment spec and loop report --------------------------------------------

inline SyntheticSpec env_spec_from_json(const json& j, const std::string& what = "env spec") {
  detail::expect_kind(j, "env_spec", what);
  SyntheticSpec s;
  if (j.contains("problems")) s.problems = detail::get<std::size_t>(j, "problems", what);
  if (j.contains("problem_chains")) s.problem_chains = detail::get<std::size_t>(j, "problem_chains", what);
  if (j.contains("problem_options")) s.problem_options = detail::get<std::size_t>(j, "problem_options", what);
  if (j.contains("mutation_rate")) s.mutation_rate = detail::get<double>(j, "mutation_rate", what);
  if (j.contains("noise")) s.noise = detail::get<double>(j, "noise", what);
  if (j.contains("converge_at")) s.converge_at = detail::get<double>(j, "converge_at", what);
  return s;
}

inline json to_json(const SyntheticSpec& s) {
  json j = detail::header("env_spec");
  j["problems"] = s.problems;
  j["problem_chains"] = s.problem_chains;
  j["problem_options"] = s.problem_options;
  j["mutation_rate"] = s.mutation_rate;
  j["noise"] = s.noise;
  j["converge_at"] = s.converge_at;
  return j;
}

inline std::string report_line(std::size_t iteration, const std::string& problem, const HistoryRecord& r) {
  json j = detail::header("loop_iteration");
  j["iteration"] = iteration;
  j["problem"] = problem;
  j["method"] = picks_json(r.method);
  j["observables"] = r.observables;
  j["reward"] = r.reward;
  return j.dump() + "\n";
}

inline std::string landscape_tsv(const Landscape& l, const std::string& observable) {
  std::string out = "entry\tx_pca_problem\ty_pca_method\t" + observable + "\n";
  for (const auto& p : l.points)
    out += std::to_string(p.entry) + "\t" + format_number(p.x) + "\t" + format_number(p.y) + "\t" +
           format_number(p.value) + "\n";
  return out;
}

}  // namespace graft::io
