#pragma once

// Command-line front end. run_cli parses, loads, calls one library
// operation and prints; it never exits the process.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graft/io.hpp"

namespace graft::cli {

inline constexpr const char* kWorkspaceVar = "GRAFT_WORKSPACE";

inline std::string describe(const MethodTuple& m) {
  std::string s;
  for (const auto& [c, v] : m.picks) s += (s.empty() ? "" : " ") + c + "=" + v.value_or("-");
  return s;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::uint64_t parse_seed(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos, 0);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size() || s.front() == '-') throw Error("seed must be a non-negative integer, got " + s);
  return v;
}

}  // namespace detail

/// Runs one command. Returns 0 on success, 1 on a domain error and 2 on a
/// usage error.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Factored decision-tree policies over knowledge graphs", "graft"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress informational output");

  std::string workspace;
  if (const char* w = std::getenv(kWorkspaceVar)) workspace = w;
  const auto path = [&](const std::string& p) {
    if (p.empty() || workspace.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(workspace) / p).string();
  };
  const auto info = [&](const std::string& line) {
    if (!quiet) out << line << "\n";
  };
  // Writes `text` to `--out` when given, otherwise to stdout.
  const auto emit = [&](const std::string& dest, const std::string& text) {
    if (dest.empty()) {
      out << text;
    } else {
      io::write_text(path(dest), text);
    }
  };

  std::map<CLI::App*, std::function<int()>> actions;
  std::string a1, a2, out_path, seed_text, rows_path, problem_path, method_path, keep = "s", k_text = "auto";

  {
    auto* c = app.add_subcommand("validate", "Check a knowledge graph for structural violations");
    c->add_option("graph", a1, "Graph file")->required();
    actions[c] = [&] {
      const auto report = validate_graph(io::load_graph(path(a1)));
      if (report.ok()) {
        info("ok");
        return 0;
      }
      for (const auto& v : report.violations) err << v.message << "\n";
      return 1;
    };
  }
  {
    auto* c = app.add_subcommand("reduce", "Reduce a knowledge graph to its spanning tree");
    c->add_option("graph", a1, "Graph file")->required();
    c->add_option("--out", out_path, "Tree file");
    actions[c] = [&] {
      emit(out_path, io::dump(io::to_json(reduce_to_tree(io::load_graph(path(a1))))));
      return 0;
    };
  }
  {
    auto* c = app.add_subcommand("build", "Compile a knowledge graph into a substrate");
    c->add_option("graph", a1, "Graph file")->required();
    c->add_option("--out", out_path, "Substrate file");
    actions[c] = [&] {
      const Substrate s = build_substrate(io::load_graph(path(a1)));
      emit(out_path, io::dump(io::to_json(s)));
      if (!out_path.empty()) {
        info("version " + s.version);
        for (auto k : s.order)
          info("chain " + s.chain(k).id + " level " + std::to_string(s.levels[k]) + " options " +
               std::to_string(s.chain(k).alphabet.size()));
      }
      return 0;
    };
  }
  {
    auto* c = app.add_subcommand("footprint", "Print joint and factored table sizes");
    c->add_option("substrate", a1, "Substrate file")->required();
    actions[c] = [&] {
      const auto f = io::load_substrate(path(a1)).footprint();
      out << "joint=" << f.joint << " factored=" << f.factored << "\n";
      return 0;
    };
  }
  {
    auto* c = app.add_subcommand("embed", "Lay out the substrate tree in the unit cube");
    c->add_option("substrate", a1, "Substrate file")->required();
    c->add_option("--out", out_path, "Embedding file");
    actions[c] = [&] {
      const Substrate s = io::load_substrate(path(a1));
      const Embedding e = layout(s.tree, s.version);
      const int k = min_injective_K(e);
      emit(out_path, io::dump(io::to_json(e, k)));
      if (!out_path.empty()) info("K* " + std::to_string(k));
      return 0;
    };
  }
  std::string node_list;
  {
    auto* c = app.add_subcommand("fingerprint", "Fingerprint a path (closed under ancestors)");
    c->add_option("substrate", a1, "Substrate file")->required();
    c->add_option("--path", node_list, "Comma-separated node ids")->required();
    c->add_option("--k", k_text, "Resolution: auto (K*) or a positive integer");
    c->add_option("--keep", keep, "Kept nodes: s or all")->check(CLI::IsMember({"s", "all"}));
    c->add_option("--out", out_path, "Fingerprint file");
    actions[c] = [&] {
      const Substrate s = io::load_substrate(path(a1));
      const Embedding e = layout(s.tree, s.version);
      int k = 0;
      if (k_text == "auto") {
        k = min_injective_K(e);
      } else {
        try {
          std::size_t pos = 0;
          k = std::stoi(k_text, &pos);
          if (pos != k_text.size()) k = 0;
        } catch (const std::exception&) {
          k = 0;
        }
        if (k < 1) throw Error("--k must be auto or a positive integer");
      }
      const auto nodes = detail::split_list(node_list);
      const auto fp = fingerprint(e, s.tree, ancestor_closure(s.tree, {nodes.begin(), nodes.end()}), k,
                                  io::keep_from_string(keep));
      emit(out_path, io::dump(io::to_json(fp)));
      return 0;
    };
  }
  {
    auto* c = app.add_subcommand("similarity", "Jaccard similarity of two fingerprints");
    c->add_option("a", a1, "Fingerprint file")->required();
    c->add_option("b", a2, "Fingerprint file")->required();
    actions[c] = [&] {
      out << io::format_number(jaccard(io::load_fingerprint(path(a1)), io::load_fingerprint(path(a2)))) << "\n";
      return 0;
    };
  }

  // The repository follows the current action tree; entries whose paths
  // lost a node are flagged stale for this run.
  const auto open_memory = [&](const std::string& file, const Substrate& s, const std::string& problem_tag) {
    MemoryRepository repo = io::load_memory(path(file));
    if (repo.entries.empty()) repo.problem_tag = problem_tag;
    if (repo.problem_tag != problem_tag)
      throw VersionError("memory holds problem tree " + repo.problem_tag + ", fingerprint is for " + problem_tag);
    rebase(repo, s);
    return repo;
  };
  const auto append_memory = [&](const std::string& file, const MemoryRepository& repo, std::size_t from) {
    std::ofstream f(path(file), std::ios::binary | std::ios::app);
    if (!f) throw Error("cannot append to " + file);
    for (std::size_t i = from; i < repo.entries.size(); ++i) f << io::memory_line(repo.entries[i]);
    if (!f) throw Error("cannot append to " + file);
  };

  std::size_t n_neighbors = 3;
  {
    auto* c = app.add_subcommand("prior", "Compile a prior from memory for a new problem");
    c->add_option("memory", a1, "Memory file")->required();
    c->add_option("substrate", a2, "Substrate file")->required();
    c->add_option("--problem", problem_path, "Problem fingerprint file")->required();
    c->add_option("--neighbors", n_neighbors, "Number of neighbours")->check(CLI::PositiveNumber);
    c->add_option("--out", out_path, "Rows file");
    actions[c] = [&] {
      const Substrate s = io::load_substrate(path(a2));
      const Fingerprint p = io::load_fingerprint(path(problem_path));
      const MemoryRepository repo = open_memory(a1, s, p.tree_tag);
      PriorParams params;
      params.n_neighbors = n_neighbors;
      emit(out_path, io::dump(io::to_json(compile_prior(repo, p, s, params))));
      return 0;
    };
  }

  const auto load_rows = [&](const Substrate& s) {
    if (rows_path.empty()) return uniform_rows(s);
    PolicyRows rows = io::rows_from_json(io::parse(io::read_text(path(rows_path)), rows_path), rows_path);
    check_rows(s, rows);
    return rows;
  };

  std::size_t count = 1;
  {
    auto* c = app.add_subcommand("sample", "Draw methods from a policy");
    c->add_option("substrate", a1, "Substrate file")->required();
    c->add_option("--rows", rows_path, "Rows file (default: uniform)");
    c->add_option("--seed", seed_text, "Seed")->required();
    c->add_option("--count", count, "Number of draws")->check(CLI::PositiveNumber);
    c->add_option("--out", out_path, "Method file (one draw) or JSON lines (several)");
    actions[c] = [&] {
      const Substrate s = io::load_substrate(path(a1));
      const PolicyRows rows = load_rows(s);
      const std::uint64_t seed = detail::parse_seed(seed_text);
      std::string text;
      for (std::size_t i = 0; i < count; ++i) {
        const MethodTuple m = sample_method(s, rows, count == 1 ? seed : derive_seed(seed, i));
        if (!out_path.empty()) {
          text += count == 1 ? io::dump(io::to_json(m, s.version)) : io::to_json(m, s.version).dump() + "\n";
        }
        info(describe(m));
      }
      if (!out_path.empty()) io::write_text(path(out_path), text);
      return 0;
    };
  }
  bool enumerate = false;
  {
    auto* c = app.add_subcommand("prob", "Exact probability of a method, or the whole support");
    c->add_option("substrate", a1, "Substrate file")->required();
    c->add_option("--rows", rows_path, "Rows file (default: uniform)");
    c->add_option("--method", method_path, "Method file");
    c->add_flag("--enumerate", enumerate, "List every admissible method with its probability");
    actions[c] = [&] {
      const Substrate s = io::load_substrate(path(a1));
      const PolicyRows rows = load_rows(s);
      if (enumerate) {
        for (const auto& e : enumerate_support(s, rows))
          out << io::format_number(e.probability) << "\t" << describe(e.method) << "\n";
        return 0;
      }
      if (method_path.empty()) throw CLI::RequiredError("--method or --enumerate");
      const MethodTuple m =
          io::method_from_json(io::parse(io::read_text(path(method_path)), method_path), method_path);
      out << io::format_number(method_probability(s, rows, m)) << "\n";
      return 0;
    };
  }
  double reward = 0.0;
  std::vector<std::string> observables;
  {
    auto* c = app.add_subcommand("record", "Append a solved instance to memory");
    c->add_option("memory", a1, "Memory file")->required();
    c->add_option("substrate", a2, "Substrate file")->required();
    c->add_option("--problem", problem_path, "Problem fingerprint file")->required();
    c->add_option("--method", method_path, "Method file")->required();
    c->add_option("--reward", reward, "Reward in [0, 100]")->required();
    c->add_option("--observable", observables, "key=value, repeatable");
    actions[c] = [&] {
      const Substrate s = io::load_substrate(path(a2));
      const Fingerprint p = io::load_fingerprint(path(problem_path));
      MemoryRepository repo = open_memory(a1, s, p.tree_tag);
      const MethodTuple m =
          io::method_from_json(io::parse(io::read_text(path(method_path)), method_path), method_path);
      if (method_probability(s, uniform_rows(s), m) == 0.0)
        throw Error("method is not admissible on this substrate: " + describe(m));
      Observables obs;
      for (const auto& kv : observables) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--observable", "expected key=value: " + kv);
        try {
          obs[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
          throw CLI::ValidationError("--observable", "value is not a number: " + kv);
        }
      }
      const std::size_t before = repo.size();
      record(repo, make_entry(s, p, m, obs, reward));
      append_memory(a1, repo, before);
      info("entries " + std::to_string(repo.size()));
      return 0;
    };
  }
  {
    auto* c = app.add_subcommand("neighbors", "Rank memory entries by problem similarity");
    c->add_option("memory", a1, "Memory file")->required();
    c->add_option("--problem", problem_path, "Problem fingerprint file")->required();
    c->add_option("--n", n_neighbors, "Number of neighbours")->check(CLI::PositiveNumber);
    actions[c] = [&] {
      const MemoryRepository repo = io::load_memory(path(a1));
      const Fingerprint p = io::load_fingerprint(path(problem_path));
      for (const auto& nb : rank_neighbors(repo, p, n_neighbors))
        out << nb.index << "\t" << io::format_number(nb.similarity) << "\t"
            << io::format_number(repo.entries[nb.index].reward) << "\n";
      return 0;
    };
  }
  std::string env_name = "synthetic", env_spec_path, env_seed_text, strategy = "worst", problem_sub_out;
  std::size_t budget = 1, problem_index = 0;
  {
    auto* c = app.add_subcommand("loop", "Run one closed-loop trial against an environment");
    c->add_option("substrate", a1, "Action substrate file")->required();
    c->add_option("memory", a2, "Memory file (appended)")->required();
    c->add_option("--env", env_name, "Environment")->check(CLI::IsMember({"synthetic"}));
    c->add_option("--env-spec", env_spec_path, "Environment spec file")->required();
    c->add_option("--env-seed", env_seed_text, "Environment seed (default: --seed)");
    c->add_option("--problem", problem_index, "Problem index within the environment");
    c->add_option("--budget", budget, "Iteration budget")->required()->check(CLI::PositiveNumber);
    c->add_option("--seed", seed_text, "Seed")->required();
    c->add_option("--strategy", strategy, "Advisor strategy: worst, random or none")
        ->check(CLI::IsMember({"worst", "random", "none"}));
    c->add_option("--problem-substrate-out", problem_sub_out, "Write the generated problem substrate here");
    c->add_option("--out", out_path, "Report file (JSON lines)")->required();
    actions[c] = [&] {
      const Substrate s = io::load_substrate(path(a1));
      const SyntheticSpec spec =
          io::env_spec_from_json(io::parse(io::read_text(path(env_spec_path)), env_spec_path), env_spec_path);
      const std::uint64_t seed = detail::parse_seed(seed_text);
      const std::uint64_t env_seed = env_seed_text.empty() ? seed : detail::parse_seed(env_seed_text);
      const SyntheticEnvironment env = make_synthetic_env(spec, env_seed, s);
      if (problem_index >= env.problem_count()) throw Error("problem index out of range");
      if (!problem_sub_out.empty()) io::write_text(path(problem_sub_out), io::dump(io::to_json(env.problem_substrate())));

      const Fingerprint p = env.problem_fingerprint(problem_index);
      MemoryRepository repo = open_memory(a2, s, p.tree_tag);
      const std::size_t before = repo.size();
      TrialConfig cfg;
      cfg.budget = budget;
      cfg.seed = seed;
      cfg.use_advisor = strategy != "none";
      cfg.strategy = strategy == "random" ? AdvisorStrategy::random_chain : AdvisorStrategy::worst_chain;
      const std::string problem = SyntheticEnvironment::problem_id(problem_index);
      const TrialResult r = run_trial(env, s, repo, problem, p, cfg);

      append_memory(a2, repo, before);
      std::string report;
      for (std::size_t i = 0; i < r.history.records.size(); ++i) report += io::report_line(i, problem, r.history.records[i]);
      io::write_text(path(out_path), report);
      info("iterations " + std::to_string(r.history.records.size()) + (r.converged ? " converged" : "") +
           (r.exhausted ? " exhausted" : ""));
      if (r.best) info("best " + io::format_number(r.best_reward) + " " + describe(*r.best));
      return 0;
    };
  }
  std::string observable, problem_sub, action_sub;
  {
    auto* c = app.add_subcommand("landscape", "Principal-component landscape of memory entries");
    c->add_option("memory", a1, "Memory file")->required();
    c->add_option("--observable", observable, "Observable to tabulate")->required();
    c->add_option("--problem-substrate", problem_sub, "Problem substrate file")->required();
    c->add_option("--action-substrate", action_sub, "Action substrate file")->required();
    c->add_option("--out", out_path, "Table file (tab-separated)");
    actions[c] = [&] {
      const Substrate ps = io::load_substrate(path(problem_sub));
      const Substrate as = io::load_substrate(path(action_sub));
      MemoryRepository repo = io::load_memory(path(a1));
      rebase(repo, as);
      const Landscape l = landscape_export(repo, layout(ps.tree, ps.version), layout(as.tree, as.version), as.tree,
                                           observable);
      if (l.problem_degenerate) err << "warning: problem fingerprints are all identical\n";
      if (l.method_degenerate) err << "warning: method fingerprints are all identical\n";
      emit(out_path, io::landscape_tsv(l, observable));
      return 0;
    };
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "graft: " << e.what() << "\nusage: graft [--quiet] <command> [args] (graft --help lists commands)\n";
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands())
      if (auto it = actions.find(sub); it != actions.end()) return it->second();
    return 2;
  } catch (const CLI::Error& e) {
    err << "graft: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "graft: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "graft: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace graft::cli
