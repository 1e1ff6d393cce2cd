#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "biasbound/measures.hpp"
#include "brute_force.hpp"

using namespace biasbound;

namespace {

// Selection probabilities of the worked example, (d,e) order.
const Cells kExample = {0.8, 0.6, 0.4, 0.1};
const Cells kModifiedExample = {0.8, 0.6, 0.4, 0.25};

SelectionModel example() { return SelectionModel::from_cells(kExample); }
SelectionModel modified_example() { return SelectionModel::from_cells(kModifiedExample); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InternalConsistency;
}

}  // namespace

TEST(TargetJoint, ValidatesCells) {
  EXPECT_NO_THROW(TargetJoint::from_cells({0.1, 0.2, 0.3, 0.4}));
  EXPECT_EQ(code_of([] { TargetJoint::from_cells({0.1, 0.2, 0.3, 0.5}); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { TargetJoint::from_cells({-0.1, 0.4, 0.3, 0.4}); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { TargetJoint::from_cells({NAN, 0.4, 0.3, 0.3}); }), ErrorCode::ValidationError);
}

TEST(TargetJoint, CellOrderMapsToIndices) {
  const auto t = TargetJoint::from_cells({0.1, 0.2, 0.3, 0.4});
  EXPECT_EQ(t.p(1, 1), 0.1);  // (d=1, e=1)
  EXPECT_EQ(t.p(0, 1), 0.2);  // (d=1, e=0)
  EXPECT_EQ(t.p(1, 0), 0.3);  // (d=0, e=1)
  EXPECT_EQ(t.p(0, 0), 0.4);
  EXPECT_EQ(t.cells(), (Cells{0.1, 0.2, 0.3, 0.4}));
}

TEST(SelectionModel, ValidatesCells) {
  EXPECT_NO_THROW(SelectionModel::from_cells({1.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(code_of([] { SelectionModel::from_cells({1.2, 0.5, 0.5, 0.5}); }), ErrorCode::ValidationError);
  EXPECT_EQ(code_of([] { SelectionModel::from_cells({0, 0, 0, 0}); }), ErrorCode::ValidationError);
  const auto s = example();
  EXPECT_EQ(s.pi(1, 1), 0.8);
  EXPECT_EQ(s.pi(1, 0), 0.6);
  EXPECT_EQ(s.pi(0, 1), 0.4);
  EXPECT_EQ(s.pi(0, 0), 0.1);
}

TEST(TrueOr, Examples) {
  EXPECT_DOUBLE_EQ(true_or(TargetJoint::uniform()), 1.0);
  // p[1][1] = p[0][0] = 0.4, p[1][0] = p[0][1] = 0.1.
  EXPECT_NEAR(true_or(TargetJoint::from_cells({0.4, 0.1, 0.1, 0.4})), 16.0, 1e-12);
}

TEST(TrueOr, ZeroCellNamesTheCell) {
  // p[e=1][d=0] = 0 is the (d=0,e=1) cell.
  try {
    true_or(TargetJoint::from_cells({0.5, 0.25, 0.0, 0.25}));
    FAIL() << "expected zero-cell error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroCell);
    EXPECT_NE(std::string(e.what()).find("(d=0,e=1)"), std::string::npos) << e.what();
  }
}

TEST(SelectedJoint, ConstantSelectionCancels) {
  const auto t = TargetJoint::from_cells({0.1, 0.2, 0.3, 0.4});
  for (double c : {0.05, 0.5, 1.0}) {
    const auto q = selected_joint(t, SelectionModel::constant(c));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(q.cells()[i], t.cells()[i], 1e-15);
  }
}

TEST(SelectedJoint, UniformTargetWithExample) {
  const auto q = selected_joint(TargetJoint::uniform(), example());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(q.cells()[i], kExample[i] / 1.9, 1e-15);
}

TEST(SelectedJoint, EmptySelection) {
  // Target mass only where pi is zero.
  const auto t = TargetJoint::from_cells({1.0, 0.0, 0.0, 0.0});
  const auto s = SelectionModel::from_cells({0.0, 0.5, 0.5, 0.5});
  EXPECT_EQ(code_of([&] { selected_joint(t, s); }), ErrorCode::EmptySelection);
}

TEST(SelectedOr, IndependenceWithExampleIsOneThird) {
  EXPECT_NEAR(selected_or(TargetJoint::uniform(), example()), 1.0 / 3.0, 1e-12);
}

TEST(SelectedOr, ConstantSelectionPreservesTrueOr) {
  const auto t = TargetJoint::from_cells({0.3, 0.1, 0.2, 0.4});
  EXPECT_NEAR(selected_or(t, SelectionModel::constant(0.3)), true_or(t), 1e-12);
}

TEST(SelectedOr, MatchesFullJointEnumeration) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Cells tc = brute::random_target(rng);
    const Cells sc = brute::random_selection(rng);
    const double expected = brute::brute_selected_or(tc, sc);
    const double got = selected_or(TargetJoint::from_cells(tc), SelectionModel::from_cells(sc));
    ASSERT_NEAR(got / expected, 1.0, 1e-10) << "iteration " << i;
  }
}

TEST(InterRr, Examples) {
  EXPECT_NEAR(inter_rr(example()), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(inter_rr(modified_example()), 5.0 / 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(inter_rr(SelectionModel::constant(0.7)), 1.0);
}

TEST(InterRr, ZeroDenominator) {
  EXPECT_EQ(code_of([] { inter_rr(SelectionModel::from_cells({0.5, 0.0, 0.5, 0.5})); }), ErrorCode::ZeroCell);
  EXPECT_EQ(code_of([] { inter_rr(SelectionModel::from_cells({0.5, 0.5, 0.0, 0.5})); }), ErrorCode::ZeroCell);
  // Zero numerator cells are allowed and give zero.
  EXPECT_EQ(inter_rr(SelectionModel::from_cells({0.0, 0.5, 0.5, 0.5})), 0.0);
}

TEST(InterOr, Examples) {
  EXPECT_NEAR(inter_or(example()), 4.0 / 9.0, 1e-12);
  const LogisticParams no_interaction{-1.0, 0.5, 0.3, 0.0};
  EXPECT_NEAR(inter_or(no_interaction.to_selection()), 1.0, 1e-12);
}

TEST(InterOr, BoundaryProbabilities) {
  EXPECT_EQ(code_of([] { inter_or(SelectionModel::from_cells({1.0, 0.6, 0.4, 0.1})); }), ErrorCode::Boundary);
  EXPECT_EQ(code_of([] { inter_or(SelectionModel::from_cells({0.8, 0.6, 0.4, 0.0})); }), ErrorCode::Boundary);
}

TEST(InterOr, EqualsRatioOfDsOddsRatios) {
  // OR_{DS|E=1} / OR_{DS|E=0} computed directly.
  const auto s = example();
  const auto odds = [](double p) { return p / (1.0 - p); };
  const double ds = (odds(s.pi(1, 1)) / odds(s.pi(0, 1))) / (odds(s.pi(1, 0)) / odds(s.pi(0, 0)));
  EXPECT_NEAR(inter_or(s), ds, 1e-12);
}

TEST(InterRd, Examples) {
  EXPECT_NEAR(inter_rd(example()), -0.1, 1e-15);
  EXPECT_NEAR(inter_rd(modified_example()), 0.05, 1e-15);
  EXPECT_LT(inter_rd(example()), 0.0);
  EXPECT_GT(inter_rd(modified_example()), 0.0);
  EXPECT_EQ(inter_rd(SelectionModel::constant(0.3)), 0.0);
}

TEST(FitLogistic, Examples) {
  const auto half = fit_logistic(SelectionModel::constant(0.5));
  EXPECT_EQ(half.beta0, 0.0);
  EXPECT_EQ(half.beta1, 0.0);
  EXPECT_EQ(half.beta2, 0.0);
  EXPECT_EQ(half.beta3, 0.0);

  const LogisticParams truth{-1.0, 0.5, 0.3, 0.0};
  const auto fitted = fit_logistic(truth.to_selection());
  EXPECT_NEAR(fitted.beta0, -1.0, 1e-12);
  EXPECT_NEAR(fitted.beta1, 0.5, 1e-12);
  EXPECT_NEAR(fitted.beta2, 0.3, 1e-12);
  EXPECT_NEAR(fitted.beta3, 0.0, 1e-12);

  // logit(0.8) - logit(0.6) - logit(0.4) + logit(0.1) = ln(4/9).
  const auto b = fit_logistic(example());
  EXPECT_NEAR(b.beta3, -0.8109302162163288, 1e-12);
  EXPECT_NEAR(std::exp(b.beta3), inter_or(example()), 1e-12);
}

TEST(FitLogistic, RoundTrip) {
  const auto s = example();
  const auto b = fit_logistic(s);
  for (int d = 0; d < 2; ++d)
    for (int e = 0; e < 2; ++e) EXPECT_NEAR(b.probability(d, e), s.pi(d, e), 1e-12);
}

TEST(FitLogistic, RejectsBoundary) {
  EXPECT_EQ(code_of([] { fit_logistic(SelectionModel::from_cells({1.0, 0.5, 0.5, 0.5})); }), ErrorCode::Boundary);
}

TEST(FitLinear, Examples) {
  const auto g = fit_linear(SelectionModel::constant(0.35));
  EXPECT_EQ(g.gamma0, 0.35);
  EXPECT_EQ(g.gamma1, 0.0);
  EXPECT_EQ(g.gamma2, 0.0);
  EXPECT_EQ(g.gamma3, 0.0);

  const auto ex = fit_linear(example());
  EXPECT_NEAR(ex.gamma0, 0.1, 1e-15);
  EXPECT_NEAR(ex.gamma1, 0.5, 1e-15);
  EXPECT_NEAR(ex.gamma2, 0.3, 1e-15);
  EXPECT_NEAR(ex.gamma3, -0.1, 1e-15);
  EXPECT_EQ(ex.gamma3, inter_rd(example()));
  EXPECT_NEAR(fit_linear(modified_example()).gamma3, 0.05, 1e-15);
}

TEST(FitLinear, RoundTripAndBoundaryAllowed) {
  const auto s = SelectionModel::from_cells({1.0, 0.0, 0.3, 0.9});
  const auto g = fit_linear(s);
  for (int d = 0; d < 2; ++d)
    for (int e = 0; e < 2; ++e) EXPECT_NEAR(g.probability(d, e), s.pi(d, e), 4e-16);
}

TEST(LinearParams, OutOfRangeModelRejected) {
  const LinearParams g{0.5, 0.4, 0.4, 0.0};  // pi(1,1) = 1.3
  EXPECT_EQ(code_of([&] { g.to_selection(); }), ErrorCode::ValidationError);
}

TEST(Decomposition, Examples) {
  const auto dec = decomposition(TargetJoint::uniform(), example());
  EXPECT_NEAR(dec.or_sel, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(dec.or_true, 1.0, 1e-12);
  EXPECT_NEAR(dec.inter_rr, 1.0 / 3.0, 1e-12);

  const auto t = TargetJoint::from_cells({0.3, 0.1, 0.2, 0.4});
  const auto flat = decomposition(t, SelectionModel::constant(0.2));
  EXPECT_NEAR(flat.or_sel, true_or(t), 1e-12);
  EXPECT_DOUBLE_EQ(flat.inter_rr, 1.0);
}

TEST(Decomposition, PropagatesZeroCells) {
  const auto t = TargetJoint::from_cells({0.5, 0.0, 0.25, 0.25});
  EXPECT_EQ(code_of([&] { decomposition(t, example()); }), ErrorCode::ZeroCell);
}

TEST(Decomposition, AgreesWithBruteForceJoint) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Cells tc = brute::random_target(rng);
    const Cells sc = brute::random_selection(rng);
    const auto dec = decomposition(TargetJoint::from_cells(tc), SelectionModel::from_cells(sc));
    ASSERT_NEAR(dec.or_sel / brute::brute_selected_or(tc, sc), 1.0, 1e-10);
    ASSERT_NEAR(dec.or_true / brute::brute_true_or(tc, sc), 1.0, 1e-10);
  }
}

TEST(RiskMeasures, Examples) {
  // P(D=1|E=1) = 0.4/0.5 = 0.8, P(D=1|E=0) = 0.1/0.5 = 0.2.
  const auto t = TargetJoint::from_cells({0.4, 0.1, 0.1, 0.4});
  EXPECT_NEAR(risk_ratio(t), 4.0, 1e-12);
  EXPECT_NEAR(risk_difference(t), 0.6, 1e-12);
}

TEST(Collapsibility, Detection) {
  EXPECT_EQ(collapsibility(SelectionModel::constant(0.4)), Collapsibility::ConstantInBoth);
  // Depends on d only: pi(1, e) = 0.9, pi(0, e) = 0.2.
  EXPECT_EQ(collapsibility(SelectionModel::from_cells({0.9, 0.9, 0.2, 0.2})), Collapsibility::ConstantInE);
  EXPECT_EQ(collapsibility(SelectionModel::from_cells({0.9, 0.3, 0.9, 0.3})), Collapsibility::ConstantInD);
  EXPECT_EQ(collapsibility(example()), Collapsibility::None);
}

TEST(Collapsibility, CaseControlDoctrine) {
  // All cases selected, control selection independent of exposure.
  const auto s = SelectionModel::from_cells({1.0, 1.0, 0.05, 0.05});
  EXPECT_EQ(collapsibility(s), Collapsibility::ConstantInE);
  EXPECT_DOUBLE_EQ(inter_rr(s), 1.0);
  const auto t = TargetJoint::from_cells({0.02, 0.01, 0.3, 0.67});
  EXPECT_NEAR(selected_or(t, s) / true_or(t), 1.0, 1e-12);
}
