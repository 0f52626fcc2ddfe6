#pragma once

// Trial cycle: compile a prior, then propose, implement, execute and score
// methods until the environment declares convergence or the budget runs out.
// Ships a synthetic environment with hidden per-problem targets.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "graft/memory.hpp"

namespace graft {

struct TrialState {
  std::string problem;
  std::optional<MethodTuple> method;
};

/// Implementation, execution and scoring operators of one environment.
/// execute must be deterministic given the state and the environment seed.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual TrialState implement(const MethodTuple& action, const TrialState& state) const = 0;
  virtual Observables execute(const TrialState& state) const = 0;
  virtual double score(const Observables& obs) const = 0;
  virtual bool converged(double reward) const = 0;
};

struct HistoryRecord {
  MethodTuple method;
  Observables observables;
  double reward = 0.0;

  friend bool operator==(const HistoryRecord&, const HistoryRecord&) = default;
};

struct TrialHistory {
  std::vector<HistoryRecord> records;

  bool contains(const MethodTuple& m) const {
    return std::any_of(records.begin(), records.end(), [&](const HistoryRecord& r) { return r.method == m; });
  }

  std::set<MethodTuple> methods() const {
    std::set<MethodTuple> out;
    for (const auto& r : records) out.insert(r.method);
    return out;
  }
};

enum class AdvisorStrategy { random_chain, worst_chain };

namespace detail {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

}  // namespace detail

/// Changes `last` on exactly one chain. random_chain visits chains in a
/// seeded random order; worst_chain visits them by ascending mean reward of
/// the history records that share `last`'s pick on the chain. Within a chain
/// the alternatives are tried in seeded random order; an alternative is
/// admissible when it has positive probability under `rows` and the rules
/// and was not tried before. nullopt when nothing is admissible.
inline std::optional<MethodTuple> advisor_edit(const TrialHistory& history, const MethodTuple& last,
                                               const Substrate& s, const PolicyRows& rows,
                                               AdvisorStrategy strategy, std::uint64_t seed) {
  if (history.records.empty()) throw Error("advisor needs a non-empty history");
  Rng rng(seed);

  std::vector<std::size_t> chains;
  for (std::size_t k = 0; k < s.chain_count(); ++k) {
    auto it = last.picks.find(s.chain(k).id);
    if (it != last.picks.end() && it->second && s.chain(k).alphabet.size() > 1) chains.push_back(k);
  }
  if (strategy == AdvisorStrategy::random_chain) {
    detail::shuffle(chains, rng);
  } else {
    std::vector<double> mean(s.chain_count(), 0.0);
    for (std::size_t k : chains) {
      const auto& id = s.chain(k).id;
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& r : history.records) {
        auto it = r.method.picks.find(id);
        if (it != r.method.picks.end() && it->second == last.picks.at(id)) {
          sum += r.reward;
          ++n;
        }
      }
      mean[k] = n ? sum / static_cast<double>(n) : kRewardMax;
    }
    std::stable_sort(chains.begin(), chains.end(), [&](std::size_t a, std::size_t b) { return mean[a] < mean[b]; });
  }

  for (std::size_t k : chains) {
    const auto& id = s.chain(k).id;
    std::vector<NodeId> options;
    for (const auto& a : s.chain(k).alphabet)
      if (a != *last.picks.at(id)) options.push_back(a);
    detail::shuffle(options, rng);
    for (const auto& a : options) {
      MethodTuple m = last;
      m.picks[id] = a;
      if (!history.contains(m) && method_probability(s, rows, m) > 0.0) return m;
    }
  }
  return std::nullopt;
}

struct TrialConfig {
  std::size_t budget = 10;
  std::uint64_t seed = 0;
  AdvisorStrategy strategy = AdvisorStrategy::worst_chain;
  bool use_advisor = true;
  bool use_memory = true;  // false: uniform prior
  PriorParams prior;
};

struct TrialResult {
  std::optional<MethodTuple> best;
  double best_reward = 0.0;
  TrialHistory history;
  bool converged = false;
  bool exhausted = false;
};

/// One trial on `problem`. The prior is compiled once from `repo` and held
/// fixed; every attempt is appended to `repo` as it is scored.
inline TrialResult run_trial(const Environment& env, const Substrate& s, MemoryRepository& repo,
                             const std::string& problem, const Fingerprint& p_new, const TrialConfig& cfg) {
  if (cfg.budget < 1) throw Error("budget must be at least 1");
  const PolicyRows rows = cfg.use_memory ? compile_prior(repo, p_new, s, cfg.prior) : uniform_rows(s);

  TrialResult out;
  for (std::size_t n = 0; n < cfg.budget; ++n) {
    std::optional<MethodTuple> m;
    if (n > 0 && cfg.use_advisor)
      m = advisor_edit(out.history, out.history.records.back().method, s, rows, cfg.strategy,
                       derive_seed(cfg.seed, 2 * n + 1));
    if (!m) {
      try {
        m = sample_method(s, rows, derive_seed(cfg.seed, 2 * n), out.history.methods());
      } catch (const SupportExhaustedError&) {
        out.exhausted = true;
        break;
      }
    }

    const TrialState state = env.implement(*m, TrialState{problem, std::nullopt});
    Observables obs = env.execute(state);
    const double reward = env.score(obs);
    record(repo, make_entry(s, p_new, *m, obs, reward));
    out.history.records.push_back({*m, std::move(obs), reward});
    if (!out.best || reward > out.best_reward) {
      out.best = *m;
      out.best_reward = reward;
    }
    if (env.converged(reward)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

struct SyntheticSpec {
  std::size_t problems = 20;
  std::size_t problem_chains = 4;  // decisions in the generated problem tree
  std::size_t problem_options = 3;  // options per problem decision
  double mutation_rate = 0.2;       // per-decision chance a problem departs from the base
  double noise = 0.0;               // reward penalty bound, as a fraction of r_max
  double converge_at = kRewardMax;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Problem tree root -c-> q<i> -s-> q<i>_o<j>. Each problem picks one
/// option per decision, departing from a base problem with probability
/// mutation_rate per decision. Action decision chain j follows problem
/// decision j mod problem_chains: its hidden pick is the base target shifted
/// by how far the problem's option sits from the base option.
class SyntheticEnvironment : public Environment {
 public:
  SyntheticEnvironment(const SyntheticSpec& spec, std::uint64_t seed, const Substrate& action)
      : spec_(spec), seed_(seed), action_(&action) {
    if (spec.problems < 1 || spec.problem_chains < 1 || spec.problem_options < 2)
      throw Error("synthetic spec needs problems >= 1, problem_chains >= 1, problem_options >= 2");
    if (!(spec.mutation_rate >= 0.0 && spec.mutation_rate <= 1.0)) throw Error("mutation_rate must lie in [0, 1]");
    if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw Error("noise must lie in [0, 1]");
    if (!(spec.converge_at >= 0.0 && spec.converge_at <= kRewardMax)) throw Error("converge_at must lie in [0, 100]");

    problem_ = build_substrate(problem_graph(spec));
    problem_embedding_ = layout(problem_.tree, problem_.version);
    problem_k_ = min_injective_K(problem_embedding_);
    action_embedding_ = layout(action.tree, action.version);
    action_k_ = min_injective_K(action_embedding_);

    Rng rng(derive_seed(seed, 0));
    for (std::size_t c = 0; c < spec.problem_chains; ++c) base_.push_back(rng.index(spec.problem_options));
    for (std::size_t k = 0; k < action.chain_count(); ++k) {
      const Chain& c = action.chain(k);
      if (c.decision) {
        link_.push_back(linked_decisions_++ % spec.problem_chains);
        base_target_.push_back(rng.index(c.alphabet.size()));
      } else {
        link_.push_back(0);
        base_target_.push_back(0);
      }
    }
    for (std::size_t i = 0; i < spec.problems; ++i) {
      Rng prng(derive_seed(seed, 1000 + i));
      std::vector<std::size_t> picks = base_;
      for (auto& p : picks)
        if (prng.bernoulli(spec.mutation_rate)) p = (p + 1 + prng.index(spec.problem_options - 1)) % spec.problem_options;
      problems_.push_back(std::move(picks));
    }
  }

  static KnowledgeGraph problem_graph(const SyntheticSpec& spec) {
    KnowledgeGraph g;
    g.root = "problem";
    g.nodes.push_back({g.root, std::nullopt});
    for (std::size_t c = 0; c < spec.problem_chains; ++c) {
      const std::string q = "q" + std::to_string(c);
      g.nodes.push_back({q, std::nullopt});
      g.edges.push_back({g.root, q, EdgeType::characterized_by});
      for (std::size_t o = 0; o < spec.problem_options; ++o) {
        const std::string opt = q + "_o" + std::to_string(o);
        g.nodes.push_back({opt, std::nullopt});
        g.edges.push_back({q, opt, EdgeType::subdivides_in});
      }
    }
    return g;
  }

  const SyntheticSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  const Substrate& problem_substrate() const { return problem_; }
  const Embedding& problem_embedding() const { return problem_embedding_; }
  int problem_k() const { return problem_k_; }
  const Embedding& action_embedding() const { return action_embedding_; }
  int action_k() const { return action_k_; }
  const std::vector<std::size_t>& base_problem() const { return base_; }
  std::size_t problem_count() const { return problems_.size(); }
  const std::vector<std::size_t>& problem(std::size_t i) const { return problems_.at(i); }

  static std::string problem_id(std::size_t i) { return "p" + std::to_string(i); }

  /// Registers an explicit problem and returns its id.
  std::string add_problem(std::vector<std::size_t> picks) {
    if (picks.size() != spec_.problem_chains) throw Error("problem needs one option per decision");
    for (auto p : picks)
      if (p >= spec_.problem_options) throw Error("problem option out of range");
    problems_.push_back(std::move(picks));
    return problem_id(problems_.size() - 1);
  }

  std::set<NodeId> problem_nodes(const std::vector<std::size_t>& picks) const {
    std::set<NodeId> nodes{problem_.tree.root};
    for (std::size_t c = 0; c < picks.size(); ++c) {
      nodes.insert("q" + std::to_string(c));
      nodes.insert("q" + std::to_string(c) + "_o" + std::to_string(picks[c]));
    }
    return nodes;
  }

  Fingerprint problem_fingerprint(std::size_t i) const { return problem_fingerprint(problem(i)); }

  Fingerprint problem_fingerprint(const std::vector<std::size_t>& picks) const {
    return fingerprint(problem_embedding_, problem_.tree, problem_nodes(picks), problem_k_);
  }

  /// Hidden target, resolved in sampling order under uniform rows so it is
  /// admissible and has positive probability.
  MethodTuple hidden_target(const std::vector<std::size_t>& picks) const {
    const Substrate& s = *action_;
    const PolicyRows mu = uniform_rows(s);
    MethodTuple m;
    for (std::size_t k : s.order) {
      const ChainKernel kern = chain_kernel(s, mu, k, m);
      const Chain& c = s.chain(k);
      if (!kern.active) {
        m.picks[c.id] = std::nullopt;
        continue;
      }
      std::size_t want = 0;
      if (c.decision) {
        const std::size_t l = link_[k];
        const std::size_t shift = (picks[l] + spec_.problem_options - base_[l]) % spec_.problem_options;
        want = (base_target_[k] + shift) % c.alphabet.size();
      }
      std::size_t a = want;
      for (std::size_t step = 0; !(kern.row.mass[a] > 0.0); ++step) {
        if (step == c.alphabet.size()) throw Error("chain " + c.id + " has no support under the uniform prior");
        a = (a + 1) % c.alphabet.size();
      }
      m.picks[c.id] = c.alphabet[a];
    }
    return m;
  }

  MethodTuple hidden_target(std::size_t i) const { return hidden_target(problem(i)); }

  Fingerprint method_fingerprint(const MethodTuple& m) const {
    return fingerprint(action_embedding_, action_->tree, method_path(*action_, m), action_k_);
  }

  /// Noiseless reward r_max * J against the hidden target.
  double true_reward(const std::vector<std::size_t>& picks, const MethodTuple& m) const {
    return kRewardMax * jaccard(method_fingerprint(m), method_fingerprint(hidden_target(picks)));
  }

  TrialState implement(const MethodTuple& action, const TrialState& state) const override {
    TrialState out = state;
    out.method = action;
    return out;
  }

  Observables execute(const TrialState& state) const override {
    if (!state.method) throw Error("nothing implemented for problem " + state.problem);
    const auto& picks = problem(parse_problem(state.problem));
    const double j = jaccard(method_fingerprint(*state.method), method_fingerprint(hidden_target(picks)));
    std::uint64_t h = detail::fnv1a(state.problem);
    for (const auto& [chain, pick] : state.method->picks) h = detail::fnv1a(chain + "=" + pick.value_or("-") + ";", h);
    const double u = static_cast<double>(derive_seed(seed_, h) >> 11) * 0x1.0p-53;
    return {{"jaccard", j}, {"penalty", spec_.noise * kRewardMax * u}};
  }

  double score(const Observables& obs) const override {
    return std::clamp(kRewardMax * obs.at("jaccard") - obs.at("penalty"), 0.0, kRewardMax);
  }

  bool converged(double reward) const override { return reward >= spec_.converge_at; }

 private:
  std::size_t parse_problem(const std::string& id) const {
    if (id.size() < 2 || id[0] != 'p') throw Error("unknown problem " + id);
    std::size_t i = 0;
    for (std::size_t c = 1; c < id.size(); ++c) {
      if (id[c] < '0' || id[c] > '9') throw Error("unknown problem " + id);
      i = i * 10 + static_cast<std::size_t>(id[c] - '0');
    }
    if (i >= problems_.size()) throw Error("unknown problem " + id);
    return i;
  }

  SyntheticSpec spec_;
  std::uint64_t seed_;
  const Substrate* action_;
  Substrate problem_;
  Embedding problem_embedding_, action_embedding_;
  int problem_k_ = 1, action_k_ = 1;
  std::vector<std::size_t> base_;
  std::size_t linked_decisions_ = 0;
  std::vector<std::size_t> link_;         // per action chain: linked problem decision
  std::vector<std::size_t> base_target_;  // per action chain: alphabet index of the base target
  std::vector<std::vector<std::size_t>> problems_;
};

inline SyntheticEnvironment make_synthetic_env(const SyntheticSpec& spec, std::uint64_t seed, const Substrate& action) {
  return SyntheticEnvironment(spec, seed, action);
}

}  // namespace graft
