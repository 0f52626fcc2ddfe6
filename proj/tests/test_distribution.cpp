#include <gtest/gtest.h>

#include <cmath>

#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace graft;
using namespace graft::testing;

namespace {

struct Morning : ::testing::Test {
  Substrate s = build_substrate(morning_graph());
  PolicyRows mu = uniform_rows(s);
};

}  // namespace

TEST_F(Morning, UniformRowsCoverDecisionNodes) {
  EXPECT_EQ(mu.rows.size(), 4u);
  EXPECT_NO_THROW(check_rows(s, mu));
  auto bad = mu;
  bad.rows.at("transport").mass = {0.7, 0.7};
  EXPECT_THROW(check_rows(s, bad), Error);
  bad = mu;
  bad.tree_version = "other";
  EXPECT_THROW(check_rows(s, bad), VersionError);
}

TEST_F(Morning, BikeForcesHelmet) {
  const auto k = chain_kernel(s, mu, s.chains.index_of("helmet"),
                              tuple({{"transport", "bike"}, {"clothes", "clothes"}}));
  EXPECT_TRUE(k.active);
  EXPECT_EQ(k.row.mass_of("helmet_yes"), 1.0);
  EXPECT_EQ(k.row.mass_of("helmet_no"), 0.0);
  const auto car = chain_kernel(s, mu, s.chains.index_of("helmet"), tuple({{"transport", "car"}, {"clothes", "clothes"}}));
  EXPECT_EQ(car.row.mass, (std::vector<double>{0.5, 0.5}));
}

TEST_F(Morning, KernelNeedsResolvedParents) {
  EXPECT_THROW(chain_kernel(s, mu, s.chains.index_of("helmet"), tuple({{"clothes", "clothes"}})), Error);
}

TEST_F(Morning, CarTupleIsOneSixteenth) {
  const auto m = tuple({{"breakfast", "breakfast_yes"},
                        {"clothes", "clothes"},
                        {"helmet", "helmet_no"},
                        {"style", "casual"},
                        {"transport", "car"}});
  EXPECT_EQ(method_probability(s, mu, m), 1.0 / 16.0);
}

TEST_F(Morning, BikeWithoutHelmetHasZeroMass) {
  const auto m = tuple({{"breakfast", "breakfast_yes"},
                        {"clothes", "clothes"},
                        {"helmet", "helmet_no"},
                        {"style", "casual"},
                        {"transport", "bike"}});
  EXPECT_EQ(method_probability(s, mu, m), 0.0);
}

TEST_F(Morning, SupportHasSixteenStructuralEntries) {
  const auto sup = enumerate_support(s, mu);
  ASSERT_EQ(sup.size(), 16u);
  double total = 0.0;
  std::size_t zeros = 0;
  for (const auto& e : sup) {
    total += e.probability;
    zeros += e.probability == 0.0;
    if (e.method.picks.at("transport") == "bike" && e.method.picks.at("helmet") == "helmet_no") {
      EXPECT_EQ(e.probability, 0.0);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_EQ(zeros, 4u);
}

TEST_F(Morning, MalformedTuplesHaveZeroProbability) {
  EXPECT_EQ(method_probability(s, mu, tuple({{"transport", "car"}})), 0.0);
  EXPECT_EQ(method_probability(s, mu,
                               tuple({{"breakfast", "nope"},
                                      {"clothes", "clothes"},
                                      {"helmet", "helmet_no"},
                                      {"style", "casual"},
                                      {"transport", "car"}})),
            0.0);
  EXPECT_EQ(method_probability(s, mu,
                               tuple({{"breakfast", "breakfast_no"},
                                      {"clothes", nullptr},
                                      {"helmet", "helmet_no"},
                                      {"style", "casual"},
                                      {"transport", "car"}})),
            0.0);
}

TEST_F(Morning, SamplingIsSeeded) {
  EXPECT_EQ(sample_method(s, mu, 9), sample_method(s, mu, 9));
  std::set<MethodTuple> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto m = sample_method(s, mu, seed);
    EXPECT_GT(method_probability(s, mu, m), 0.0);
    seen.insert(m);
  }
  EXPECT_EQ(seen.size(), 12u);
}

TEST_F(Morning, AvoidSetIsHonouredUntilExhausted) {
  std::set<MethodTuple> avoid;
  for (int i = 0; i < 12; ++i) {
    const auto m = sample_method(s, mu, static_cast<std::uint64_t>(i), avoid);
    EXPECT_FALSE(avoid.count(m));
    avoid.insert(m);
  }
  EXPECT_THROW(sample_method(s, mu, 99, avoid), SupportExhaustedError);
}

TEST_F(Morning, MethodPathUnionsActiveChains) {
  const auto m = tuple({{"breakfast", "breakfast_yes"},
                        {"clothes", "clothes"},
                        {"helmet", "helmet_yes"},
                        {"style", "casual"},
                        {"transport", "bike"}});
  EXPECT_EQ(method_path(s, m), (std::set<NodeId>{"breakfast", "breakfast_yes", "clothes", "helmet", "helmet_yes",
                                                 "style", "casual", "transport", "bike"}));
}

TEST(NestedActivity, InactiveChainsTakeTheMarker) {
  const auto s = build_substrate(GraphBuilder("r")
                                     .c("r", "A")
                                     .s("A", "a1")
                                     .s("A", "a2")
                                     .c("a1", "B")
                                     .s("B", "b1")
                                     .s("B", "b2")
                                     .build());
  const auto mu = uniform_rows(s);
  EXPECT_EQ(method_probability(s, mu, tuple({{"A", "a2"}, {"B", nullptr}})), 0.5);
  EXPECT_EQ(method_probability(s, mu, tuple({{"A", "a2"}, {"B", "b1"}})), 0.0);
  EXPECT_EQ(method_probability(s, mu, tuple({{"A", "a1"}, {"B", nullptr}})), 0.0);
  EXPECT_EQ(method_probability(s, mu, tuple({{"A", "a1"}, {"B", "b2"}})), 0.25);
  const auto k = chain_kernel(s, mu, s.chains.index_of("B"), tuple({{"A", "a2"}}));
  EXPECT_FALSE(k.active);
  EXPECT_EQ(k.inactive_mass, 1.0);
}

TEST(Rules, ConjunctionAndListOrder) {
  // zero_out then force on the same chain, each with two triggers.
  auto s = build_substrate(GraphBuilder("r")
                               .c("r", "A")
                               .s("A", "a1")
                               .s("A", "a2")
                               .c("r", "B")
                               .s("B", "b1")
                               .s("B", "b2")
                               .c("r", "T")
                               .s("T", "t1")
                               .s("T", "t2")
                               .s("T", "t3")
                               .rule({"a1", "b1"}, {"t1"}, Effect::zero_out, "both")
                               .rule({"a1"}, {"t1", "t2"}, Effect::force, "a1")
                               .build());
  const auto mu = uniform_rows(s);
  const auto t = s.chains.index_of("T");
  auto k = edited_chain_distribution(s, mu, t, tuple({{"A", "a1"}, {"B", "b1"}}));
  EXPECT_EQ(k.mass, (std::vector<double>{0.0, 1.0, 0.0}));
  k = edited_chain_distribution(s, mu, t, tuple({{"A", "a1"}, {"B", "b2"}}));
  EXPECT_EQ(k.mass, (std::vector<double>{0.5, 0.5, 0.0}));
  k = edited_chain_distribution(s, mu, t, tuple({{"A", "a2"}, {"B", "b1"}}));
  EXPECT_EQ(k.mass, (std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}));
}

TEST(Rules, InternalTargetSelectsItsSlice) {
  auto s = build_substrate(GraphBuilder("r")
                               .c("r", "A")
                               .s("A", "a1")
                               .s("A", "a2")
                               .c("r", "T")
                               .s("T", "p")
                               .s("T", "q")
                               .s("p", "p1")
                               .s("p", "p2")
                               .rule({"a1"}, {"p"}, Effect::force)
                               .build());
  const auto mu = uniform_rows(s);
  const auto k = edited_chain_distribution(s, mu, s.chains.index_of("T"), tuple({{"A", "a1"}}));
  EXPECT_EQ(k.options, (std::vector<NodeId>{"p1", "p2", "q"}));
  EXPECT_EQ(k.mass, (std::vector<double>{0.5, 0.5, 0.0}));
}

TEST(Rules, ZeroMassContextCanStillEmptySupport) {
  // A force onto a member whose row mass is zero leaves nothing.
  auto s = build_substrate(
      GraphBuilder("r").c("r", "A").s("A", "a1").s("A", "a2").c("r", "T").s("T", "t1").s("T", "t2").rule(
          {"a1"}, {"t1"}, Effect::force).build());
  auto rows = uniform_rows(s);
  rows.rows.at("T").mass = {0.0, 1.0};
  EXPECT_THROW(edited_chain_distribution(s, rows, s.chains.index_of("T"), tuple({{"A", "a1"}})), EmptySupportError);
  // Sampling draws a1 half the time and hits the empty context.
  bool raised = false;
  for (std::uint64_t seed = 0; seed < 20 && !raised; ++seed) {
    try {
      sample_method(s, rows, seed);
    } catch (const EmptySupportError&) {
      raised = true;
    }
  }
  EXPECT_TRUE(raised);
  // Enumeration still lists the zero-probability context when its prefix has no mass.
  rows.rows.at("A").mass = {0.0, 1.0};
  double total = 0.0;
  for (const auto& e : enumerate_support(s, rows)) total += e.probability;
  EXPECT_EQ(total, 1.0);
}

TEST(Oracle, AgreesOnRandomSubstrates) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto rs = random_substrate(seed);
    const Oracle oracle(rs.substrate.graph, rs.rows);
    double total = 0.0;
    for (const auto& e : enumerate_support(rs.substrate, rs.rows)) total += e.probability;
    EXPECT_NEAR(total, 1.0, 1e-12) << "seed " << seed;
    for (const auto& e : oracle.all_tuples())
      EXPECT_NEAR(method_probability(rs.substrate, rs.rows, e.method), e.probability, 1e-12) << "seed " << seed;
  }
}

TEST(Enumeration, CapIsEnforced) {
  GraphBuilder b("r");
  for (int c = 0; c < 21; ++c) {
    const std::string id = "c" + std::to_string(c);
    b.c("r", id).s(id, id + "_0").s(id, id + "_1");
  }
  const auto s = build_substrate(b.build());
  EXPECT_EQ(s.footprint().joint, 1u << 21);
  EXPECT_THROW(enumerate_support(s, uniform_rows(s)), Error);
}
