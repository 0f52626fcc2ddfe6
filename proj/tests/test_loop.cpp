#include <gtest/gtest.h>

#include <functional>

#include "graft/loop.hpp"
#include "support/fixtures.hpp"

using namespace graft;
using namespace graft::testing;

namespace {

// Reward given by a plain function of the method.
class StubEnv : public Environment {
 public:
  explicit StubEnv(std::function<double(const MethodTuple&)> f, double stop = 101.0) : f_(std::move(f)), stop_(stop) {}
  TrialState implement(const MethodTuple& action, const TrialState& state) const override {
    TrialState out = state;
    out.method = action;
    return out;
  }
  Observables execute(const TrialState& state) const override { return {{"r", f_(*state.method)}}; }
  double score(const Observables& obs) const override { return obs.at("r"); }
  bool converged(double reward) const override { return reward >= stop_; }

 private:
  std::function<double(const MethodTuple&)> f_;
  double stop_;
};

Substrate small() {
  return build_substrate(
      GraphBuilder("r").c("r", "A").s("A", "a1").s("A", "a2").s("A", "a3").c("r", "B").s("B", "b1").s("B", "b2").build());
}

Fingerprint pfp() { return {"P", 2, KeepPolicy::s_only, {{0, 0, 1}}}; }

}  // namespace

TEST(RunTrial, BudgetOneAppendsOnce) {
  const auto s = build_substrate(morning_graph());
  MemoryRepository repo{"P", s.version, {}};
  StubEnv env([](const MethodTuple&) { return 10.0; });
  TrialConfig cfg;
  cfg.budget = 1;
  const auto r = run_trial(env, s, repo, "x", pfp(), cfg);
  EXPECT_EQ(repo.size(), 1u);
  EXPECT_EQ(r.history.records.size(), 1u);
  EXPECT_EQ(r.best_reward, 10.0);
  cfg.budget = 0;
  EXPECT_THROW(run_trial(env, s, repo, "x", pfp(), cfg), Error);
}

TEST(RunTrial, CoversSmallSupportThenStops) {
  const auto s = small();
  MemoryRepository repo{"P", s.version, {}};
  StubEnv env([](const MethodTuple&) { return 0.0; });
  for (bool advisor : {true, false}) {
    TrialConfig cfg;
    cfg.budget = 20;
    cfg.seed = 4;
    cfg.use_advisor = advisor;
    const auto r = run_trial(env, s, repo, "x", pfp(), cfg);
    EXPECT_EQ(r.history.records.size(), 6u);
    EXPECT_EQ(r.history.methods().size(), 6u);
    EXPECT_TRUE(r.exhausted);
    EXPECT_FALSE(r.converged);
  }
  EXPECT_EQ(repo.size(), 12u);
}

TEST(RunTrial, StopsOnConvergence) {
  const auto s = small();
  MemoryRepository repo{"P", s.version, {}};
  StubEnv env([](const MethodTuple& m) { return m.picks.at("A") == "a2" ? 100.0 : 20.0; }, 100.0);
  TrialConfig cfg;
  cfg.budget = 20;
  const auto r = run_trial(env, s, repo, "x", pfp(), cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.best_reward, 100.0);
  EXPECT_EQ(r.best->picks.at("A"), "a2");
  EXPECT_EQ(r.history.records.back().reward, 100.0);
}

TEST(RunTrial, DeterministicAndNeverRepeats) {
  const auto s = build_substrate(morning_graph());
  StubEnv env([](const MethodTuple& m) { return m.picks.at("style") == "formal" ? 60.0 : 30.0; });
  for (auto strategy : {AdvisorStrategy::worst_chain, AdvisorStrategy::random_chain}) {
    TrialConfig cfg;
    cfg.budget = 12;
    cfg.seed = 77;
    cfg.strategy = strategy;
    MemoryRepository r1{"P", s.version, {}}, r2{"P", s.version, {}};
    const auto a = run_trial(env, s, r1, "x", pfp(), cfg);
    const auto b = run_trial(env, s, r2, "x", pfp(), cfg);
    EXPECT_EQ(a.history.records, b.history.records);
    EXPECT_EQ(r1, r2);
    EXPECT_EQ(a.history.methods().size(), a.history.records.size());
    for (const auto& rec : a.history.records) EXPECT_GT(method_probability(s, uniform_rows(s), rec.method), 0.0);
  }
}

TEST(Advisor, WorstChainEditsLowestMeanChain) {
  const auto s = small();
  const auto mu = uniform_rows(s);
  TrialHistory h;
  h.records.push_back({tuple({{"A", "a1"}, {"B", "b1"}}), {}, 10.0});
  h.records.push_back({tuple({{"A", "a2"}, {"B", "b1"}}), {}, 90.0});
  // Mean over records sharing the last pick: A=a1 -> 10, B=b1 -> 50.
  const auto last = tuple({{"A", "a1"}, {"B", "b1"}});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = advisor_edit(h, last, s, mu, AdvisorStrategy::worst_chain, seed);
    ASSERT_TRUE(m);
    EXPECT_EQ(*m, tuple({{"A", "a3"}, {"B", "b1"}}));
  }
  EXPECT_THROW(advisor_edit({}, last, s, mu, AdvisorStrategy::worst_chain, 0), Error);
}

TEST(Advisor, RespectsRulesAndReportsExhaustion) {
  const auto s = build_substrate(morning_graph());
  const auto mu = uniform_rows(s);
  const auto last = tuple({{"breakfast", "breakfast_yes"},
                           {"clothes", "clothes"},
                           {"helmet", "helmet_no"},
                           {"style", "casual"},
                           {"transport", "car"}});
  TrialHistory h;
  h.records.push_back({last, {}, 0.0});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = advisor_edit(h, last, s, mu, AdvisorStrategy::random_chain, seed);
    ASSERT_TRUE(m);
    EXPECT_GT(method_probability(s, mu, *m), 0.0);
    EXPECT_EQ(*m, *advisor_edit(h, last, s, mu, AdvisorStrategy::random_chain, seed));
  }
  // Every single-chain edit of a tuple already tried leaves nothing.
  const auto one = build_substrate(GraphBuilder("r").c("r", "A").s("A", "a1").s("A", "a2").build());
  TrialHistory both;
  both.records.push_back({tuple({{"A", "a1"}}), {}, 0.0});
  both.records.push_back({tuple({{"A", "a2"}}), {}, 0.0});
  EXPECT_FALSE(advisor_edit(both, tuple({{"A", "a1"}}), one, uniform_rows(one), AdvisorStrategy::worst_chain, 0));
}

TEST(SyntheticEnvironment, NoiselessRewardIsScaledJaccard) {
  const auto s = build_substrate(morning_graph());
  SyntheticSpec spec;
  spec.noise = 0.0;
  const auto env = make_synthetic_env(spec, 9, s);
  for (std::size_t i = 0; i < env.problem_count(); ++i) {
    const auto target = env.hidden_target(i);
    EXPECT_GT(method_probability(s, uniform_rows(s), target), 0.0);
    TrialState st{env.problem_id(i), target};
    EXPECT_EQ(env.score(env.execute(st)), 100.0);
    const auto other = sample_method(s, uniform_rows(s), i);
    st.method = other;
    const auto obs = env.execute(st);
    EXPECT_EQ(obs.at("penalty"), 0.0);
    EXPECT_EQ(env.score(obs), env.true_reward(env.problem(i), other));
  }
}

TEST(SyntheticEnvironment, NoiseIsBoundedAndDeterministic) {
  const auto s = build_substrate(morning_graph());
  SyntheticSpec spec;
  spec.noise = 0.1;
  const auto env = make_synthetic_env(spec, 9, s);
  const TrialState st{"p3", sample_method(s, uniform_rows(s), 1)};
  const auto obs = env.execute(st);
  EXPECT_GE(obs.at("penalty"), 0.0);
  EXPECT_LT(obs.at("penalty"), 10.0);
  EXPECT_EQ(obs, env.execute(st));
  EXPECT_THROW(env.execute({"p99", st.method}), Error);
  EXPECT_THROW(env.execute({"p3", std::nullopt}), Error);
}

TEST(SyntheticEnvironment, NoMutationSharesOneTarget) {
  const auto s = build_substrate(morning_graph());
  SyntheticSpec spec;
  spec.mutation_rate = 0.0;
  const auto env = make_synthetic_env(spec, 2, s);
  for (std::size_t i = 0; i < env.problem_count(); ++i) {
    EXPECT_EQ(env.problem(i), env.base_problem());
    EXPECT_EQ(env.hidden_target(i), env.hidden_target(0));
  }
}

TEST(SyntheticEnvironment, NearProblemsHaveNearTargets) {
  const auto s = build_substrate(morning_graph());
  SyntheticSpec spec;
  spec.mutation_rate = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto env = make_synthetic_env(spec, seed, s);
    const auto base = env.base_problem();
    const auto shifted = [&](std::size_t d) {
      auto p = base;
      for (std::size_t c = 0; c < d; ++c) p[c] = (p[c] + 1) % spec.problem_options;
      return p;
    };
    const auto target = env.hidden_target(base);
    const double near = env.true_reward(shifted(1), target);
    const double far = env.true_reward(shifted(2), target);
    EXPECT_LT(near, 100.0);
    EXPECT_LE(far, near);
    EXPECT_GT(jaccard(env.problem_fingerprint(base), env.problem_fingerprint(shifted(1))),
              jaccard(env.problem_fingerprint(base), env.problem_fingerprint(shifted(2))));
  }
}

TEST(SyntheticEnvironment, RejectsBadSpecs) {
  const auto s = build_substrate(morning_graph());
  SyntheticSpec spec;
  spec.problem_options = 1;
  EXPECT_THROW(make_synthetic_env(spec, 0, s), Error);
  spec = {};
  spec.noise = 2.0;
  EXPECT_THROW(make_synthetic_env(spec, 0, s), Error);
  spec = {};
  auto env = make_synthetic_env(spec, 0, s);
  EXPECT_THROW(env.add_problem({0, 0}), Error);
  EXPECT_EQ(env.add_problem({0, 1, 2, 0}), "p20");
}
