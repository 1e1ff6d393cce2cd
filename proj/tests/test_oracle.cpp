#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "biasbound/oracle.hpp"

using namespace biasbound;

namespace {

constexpr std::uint64_t kModels = 100'000;

}  // namespace

TEST(Sampler, SameSeedSameModels) {
  const auto a = sample_models(SamplerConfig::random(5000, 42));
  const auto b = sample_models(SamplerConfig::random(5000, 42));
  const auto c = sample_models(SamplerConfig::random(5000, 43));
  ASSERT_EQ(a.size(), 5000u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Sampler, PrefixStable) {
  // Growing the count only appends models.
  const auto small = sample_models(SamplerConfig::random(100, 9));
  const auto large = sample_models(SamplerConfig::random(10000, 9));
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i], large[i]);
}

TEST(Sampler, WorkerCountDoesNotChangeModels) {
  auto cfg = SamplerConfig::random(3 * kBlockSize + 17, 5, Constraint::R4aOR);
  const auto one = sample_models(cfg);
  cfg.workers = 3;
  EXPECT_EQ(sample_models(cfg), one);
}

TEST(Sampler, ModelsAreInterior) {
  for (const auto& m : sample_models(SamplerConfig::random(10000, 1))) {
    for (double p : m.cells()) {
      ASSERT_GE(p, kSamplerEpsilon);
      ASSERT_LE(p, 1.0 - kSamplerEpsilon);
    }
  }
}

TEST(Sampler, GridSizes) {
  const auto all = sample_models(SamplerConfig::grid(5));
  EXPECT_EQ(all.size(), 625u);
  std::set<Cells> distinct;
  for (const auto& m : all) distinct.insert(m.cells());
  EXPECT_EQ(distinct.size(), 625u);
  // Lattice points (j+1)/6.
  EXPECT_NEAR(all.front().pi(0, 0), 1.0 / 6.0, 1e-15);
  // Zero-interaction constraints solve one cell; some solutions leave the interior.
  EXPECT_LE(sample_models(SamplerConfig::grid(5, Constraint::R1)).size(), 125u);
  EXPECT_GT(sample_models(SamplerConfig::grid(5, Constraint::R1)).size(), 0u);
}

TEST(Sampler, RejectsBadConfig) {
  EXPECT_THROW(sample_models(SamplerConfig::random(0, 1)), Error);
  EXPECT_THROW(sample_models(SamplerConfig::grid(1)), Error);
}

TEST(Sampler, ConstraintsHoldExactly) {
  for (const auto& m : sample_models(SamplerConfig::random(20000, 3, Constraint::R1)))
    ASSERT_NEAR(inter_rr(m), 1.0, 1e-12);
  for (const auto& m : sample_models(SamplerConfig::random(20000, 3, Constraint::R2a))) {
    ASSERT_NEAR(inter_or(m), 1.0, 1e-12);
    ASSERT_TRUE(same_direction(derive_assumptions(m, Scale::OddsRatio).sign_d,
                               derive_assumptions(m, Scale::OddsRatio).sign_e));
  }
  for (const auto& m : sample_models(SamplerConfig::random(5000, 3, Constraint::R3b))) {
    ASSERT_NEAR(inter_rd(m), 0.0, 1e-12);
  }
  for (const auto& m : sample_models(SamplerConfig::random(5000, 3, Constraint::R4aRD))) {
    ASSERT_LE(inter_rd(m), 0.0);
  }
  for (const auto& m : sample_models(SamplerConfig::random(5000, 3, Constraint::R4bOR))) {
    ASSERT_GE(inter_or(m), 1.0);
  }
}

TEST(Hypotheses, WorkedExamples) {
  const auto ex = SelectionModel::from_cells({0.8, 0.6, 0.4, 0.1});
  EXPECT_TRUE(hypotheses_hold(ResultId::R4aRD, ex, 1e-12));
  EXPECT_TRUE(hypotheses_hold(ResultId::R4aOR, ex, 1e-12));
  EXPECT_TRUE(hypotheses_hold(ResultId::R4aRR, ex, 1e-12));
  EXPECT_FALSE(hypotheses_hold(ResultId::R2a, ex, 1e-12));
  EXPECT_TRUE(conclusion_holds(ResultId::R4aRD, inter_rr(ex)));
  EXPECT_FALSE(conclusion_holds(ResultId::R4bRD, inter_rr(ex)));
}

TEST(Verify, EveryResultHoldsOnRandomModels) {
  for (ResultId id : kAllResults) {
    const auto r = verify_result(id, SamplerConfig::random(kModels, 42, constraint_for(id)));
    EXPECT_EQ(r.models_tested, kModels) << to_string(id);
    EXPECT_EQ(r.models_satisfying_conditions, kModels) << to_string(id);
    EXPECT_EQ(r.violations, 0u) << to_string(id);
    EXPECT_TRUE(r.passed());
    EXPECT_FALSE(r.first_violation);
  }
}

TEST(Verify, EveryResultHoldsOnGrid) {
  for (ResultId id : kAllResults) {
    const auto r = verify_result(id, SamplerConfig::grid(12, constraint_for(id)));
    EXPECT_GT(r.models_satisfying_conditions, 0u) << to_string(id);
    EXPECT_EQ(r.violations, 0u) << to_string(id);
  }
}

TEST(Verify, UnconstrainedSamplerFiltersByHypotheses) {
  const auto r = verify_result(ResultId::R4aRD, SamplerConfig::random(20000, 1));
  EXPECT_EQ(r.models_tested, 20000u);
  EXPECT_GT(r.models_satisfying_conditions, 0u);
  EXPECT_LT(r.models_satisfying_conditions, 20000u);
  EXPECT_EQ(r.violations, 0u);
}

TEST(Verify, WorkerInvariance) {
  auto cfg = SamplerConfig::random(50000, 7, Constraint::R4bOR);
  const auto one = verify_result(ResultId::R4bOR, cfg);
  cfg.workers = 4;
  const auto four = verify_result(ResultId::R4bOR, cfg);
  EXPECT_EQ(one.models_tested, four.models_tested);
  EXPECT_EQ(one.models_satisfying_conditions, four.models_satisfying_conditions);
  EXPECT_EQ(one.violations, four.violations);
}

TEST(Witness, ModifiedExampleIsAWitnessForR4aRd) {
  const auto m = SelectionModel::from_cells({0.8, 0.6, 0.4, 0.25});
  EXPECT_FALSE(hypotheses_hold(ResultId::R4aRD, m, 1e-12));
  EXPECT_TRUE(conclusion_holds(ResultId::R4aRD, inter_rr(m)));
  EXPECT_NEAR(inter_rr(m), 5.0 / 6.0, 1e-12);
}

TEST(Witness, FoundForR4aRd) {
  const auto w = find_nonnecessity_witness(ResultId::R4aRD, SamplerConfig::random(kModels, 42));
  ASSERT_TRUE(w);
  EXPECT_FALSE(hypotheses_hold(ResultId::R4aRD, w->model, 1e-12));
  EXPECT_LE(inter_rr(w->model), 1.0);
}

TEST(Witness, FoundForR1) {
  const auto w = find_nonnecessity_witness(ResultId::R1, SamplerConfig::random(kModels, 42, Constraint::R1));
  ASSERT_TRUE(w);
  EXPECT_EQ(collapsibility(w->model, 1e-12), Collapsibility::None);
  EXPECT_NEAR(w->inter_rr, 1.0, 1e-9);
}

TEST(Witness, AbsentWhenHypothesesAlwaysHold) {
  // Every model drawn under the R2a constraint meets the R2a hypotheses.
  EXPECT_FALSE(find_nonnecessity_witness(ResultId::R2a, SamplerConfig::random(20000, 42, Constraint::R2a)));
}

TEST(Explore, CountsAddUp) {
  for (auto scale : {Scale::OddsRatio, Scale::RiskDifference, Scale::RiskRatio}) {
    const auto r = explore_positive_interaction(scale, SamplerConfig::random(20000, 4));
    EXPECT_EQ(r.models_tested, 20000u);
    EXPECT_EQ(r.below_one + r.equal_one + r.above_one, r.models_tested);
  }
  // A positive RR interaction always pushes Inter_RR above one.
  const auto rr = explore_positive_interaction(Scale::RiskRatio, SamplerConfig::random(20000, 4));
  EXPECT_EQ(rr.below_one, 0u);
}

TEST(LogisticIdentity, ReferenceValue) {
  const LogisticParams b{1.0, 0.5, 0.5, -0.3};
  const auto r = check_logistic_identity(b, 1e-12);
  EXPECT_TRUE(r.applicable);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.lhs, 0.12172108929920311, 1e-12);
  EXPECT_NEAR(inter_rr(b.to_selection()), 0.924759883161775, 1e-12);
}

TEST(LogisticIdentity, HoldsOnRandomParameters) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 20000; ++i) {
    LogisticParams b{u(rng), u(rng), u(rng), 0.0};
    auto r = check_logistic_identity(b, 1e-12);
    ASSERT_TRUE(r.passed) << r.residual;
    b.beta3 = -std::abs(u(rng));
    b.beta2 = std::copysign(b.beta2, b.beta1);
    r = check_logistic_identity(b, 1e-12);
    ASSERT_TRUE(r.applicable);
    ASSERT_TRUE(r.passed) << r.residual;
    b.beta3 = std::abs(u(rng));
    b.beta2 = -b.beta2;
    r = check_logistic_identity(b, 1e-12);
    ASSERT_TRUE(r.applicable);
    ASSERT_TRUE(r.passed) << r.residual;
  }
}

TEST(LogisticIdentity, MixedSignsMakeNoClaim) {
  EXPECT_FALSE(check_logistic_identity({0.0, 0.5, 0.5, 0.3}, 1e-12).applicable);
}

TEST(LinearIdentity, ReferenceValue) {
  const auto r = check_linear_identity({0.1, 0.5, 0.3, -0.1}, 1e-12);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.lhs, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.rhs, 1.0 / 3.0, 1e-12);
}

TEST(LinearIdentity, HoldsOnRandomParameters) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  int checked = 0;
  while (checked < 20000) {
    const Cells c{u(rng), u(rng), u(rng), u(rng)};
    const auto g = fit_linear(SelectionModel::from_cells(c));
    const auto r = check_linear_identity(g, 1e-12);
    ASSERT_TRUE(r.passed) << r.residual;
    ++checked;
  }
}

TEST(LinearIdentity, ZeroDenominator) {
  EXPECT_THROW(check_linear_identity({0.0, 0.0, 0.3, 0.1}, 1e-12), Error);
}

TEST(Simulate, ConvergesToPopulationValue) {
  const auto r = simulate_study(TargetJoint::uniform(), SelectionModel::from_cells({0.8, 0.6, 0.4, 0.1}),
                                1'000'000, 42);
  EXPECT_EQ(r.n, 1'000'000u);
  EXPECT_NEAR(r.empirical_selected_or / (1.0 / 3.0), 1.0, 0.05);
  std::uint64_t total = 0;
  for (const auto& e : r.counts)
    for (const auto& d : e)
      for (auto v : d) total += v;
  EXPECT_EQ(total, r.n);
}

TEST(Simulate, FullSelectionKeepsEveryone) {
  const auto r = simulate_study(TargetJoint::from_cells({0.2, 0.3, 0.1, 0.4}), SelectionModel::constant(1.0),
                                10000, 1);
  EXPECT_EQ(r.selected, 10000u);
}

TEST(Simulate, TinySampleIsDegenerate) {
  try {
    simulate_study(TargetJoint::uniform(), SelectionModel::constant(0.5), 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSample);
  }
}

TEST(Simulate, WorkerInvariance) {
  const auto t = TargetJoint::from_cells({0.2, 0.3, 0.1, 0.4});
  const auto s = SelectionModel::from_cells({0.8, 0.6, 0.4, 0.1});
  const auto a = simulate_study(t, s, 300'000, 9, 1);
  const auto b = simulate_study(t, s, 300'000, 9, 3);
  EXPECT_EQ(a.counts, b.counts);
}
