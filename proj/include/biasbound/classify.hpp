#pragma once

// Rule engine: qualitative assumptions about the selection mechanism ->
// direction of the bias in the selected-population odds ratio.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biasbound/error.hpp"
#include "biasbound/measures.hpp"

namespace biasbound {

enum class MonotoneSign { NonDecreasing, NonIncreasing, Flat, Unknown };
enum class Scale { RiskRatio, OddsRatio, RiskDifference };
enum class InteractionSign { NonPositive, Zero, NonNegative, Unknown };
enum class Direction { Equal, SelectedIsLowerBound, SelectedIsUpperBound, Indeterminate };
enum class AppliedResult { R1, R2a, R2b, R3a, R3b, R4a, R4b, None };
enum class Variable { E, D };

struct QualitativeAssumptions {
  MonotoneSign sign_d = MonotoneSign::Unknown;
  MonotoneSign sign_e = MonotoneSign::Unknown;
  Scale scale = Scale::RiskRatio;
  InteractionSign interaction_sign = InteractionSign::Unknown;

  friend bool operator==(const QualitativeAssumptions&, const QualitativeAssumptions&) = default;
};

struct Rationale {
  bool monotonicity_used = false;
  std::vector<AppliedResult> rules_fired;
  std::vector<std::string> hypotheses;  // hypotheses the verdict relies on
  std::vector<std::string> unmet;       // filled for Indeterminate
  std::vector<std::string> notes;
};

/// Exact quantities a numeric verdict was checked against.
struct CrossCheck {
  double inter_rr = 1.0;
  std::optional<double> or_sel;
  std::optional<double> or_true;
};

struct BoundVerdict {
  Direction direction = Direction::Indeterminate;
  AppliedResult applied_result = AppliedResult::None;
  Rationale rationale;
  std::optional<CrossCheck> cross_check;
};

// ---------------------------------------------------------------------------
// String forms used by the CLI and reports.

inline std::string_view to_string(MonotoneSign s) {
  switch (s) {
    case MonotoneSign::NonDecreasing: return "non_decreasing";
    case MonotoneSign::NonIncreasing: return "non_increasing";
    case MonotoneSign::Flat: return "flat";
    case MonotoneSign::Unknown: return "unknown";
  }
  return "unknown";
}

inline std::string_view to_string(Scale s) {
  switch (s) {
    case Scale::RiskRatio: return "rr";
    case Scale::OddsRatio: return "or";
    case Scale::RiskDifference: return "rd";
  }
  return "rr";
}

inline std::string_view to_string(InteractionSign s) {
  switch (s) {
    case InteractionSign::NonPositive: return "non_positive";
    case InteractionSign::Zero: return "zero";
    case InteractionSign::NonNegative: return "non_negative";
    case InteractionSign::Unknown: return "unknown";
  }
  return "unknown";
}

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::Equal: return "equal";
    case Direction::SelectedIsLowerBound: return "selected_is_lower_bound";
    case Direction::SelectedIsUpperBound: return "selected_is_upper_bound";
    case Direction::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

inline std::string_view to_string(AppliedResult r) {
  switch (r) {
    case AppliedResult::R1: return "R1";
    case AppliedResult::R2a: return "R2a";
    case AppliedResult::R2b: return "R2b";
    case AppliedResult::R3a: return "R3a";
    case AppliedResult::R3b: return "R3b";
    case AppliedResult::R4a: return "R4a";
    case AppliedResult::R4b: return "R4b";
    case AppliedResult::None: return "none";
  }
  return "none";
}

inline std::string_view to_string(Variable v) { return v == Variable::E ? "E" : "D"; }

namespace detail {

inline std::string lowered(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::tolower(c));
  });
  return out;
}

}  // namespace detail

inline MonotoneSign parse_monotone_sign(std::string_view text) {
  const std::string s = detail::lowered(text);
  if (s == "non_decreasing" || s == "nondecreasing" || s == "increasing" || s == "+")
    return MonotoneSign::NonDecreasing;
  if (s == "non_increasing" || s == "nonincreasing" || s == "decreasing" || s == "-")
    return MonotoneSign::NonIncreasing;
  if (s == "flat" || s == "0") return MonotoneSign::Flat;
  if (s == "unknown" || s == "?") return MonotoneSign::Unknown;
  throw Error(ErrorCode::ValidationError, "unknown monotonicity sign '" + std::string(text) + "'");
}

inline Scale parse_scale(std::string_view text) {
  const std::string s = detail::lowered(text);
  if (s == "rr" || s == "risk_ratio") return Scale::RiskRatio;
  if (s == "or" || s == "odds_ratio") return Scale::OddsRatio;
  if (s == "rd" || s == "risk_difference") return Scale::RiskDifference;
  throw Error(ErrorCode::ValidationError, "unknown interaction scale '" + std::string(text) + "'");
}

inline InteractionSign parse_interaction_sign(std::string_view text) {
  const std::string s = detail::lowered(text);
  if (s == "non_positive" || s == "nonpositive" || s == "negative" || s == "-")
    return InteractionSign::NonPositive;
  if (s == "zero" || s == "none" || s == "0") return InteractionSign::Zero;
  if (s == "non_negative" || s == "nonnegative" || s == "positive" || s == "+")
    return InteractionSign::NonNegative;
  if (s == "unknown" || s == "?") return InteractionSign::Unknown;
  throw Error(ErrorCode::ValidationError, "unknown interaction sign '" + std::string(text) + "'");
}

inline Variable parse_variable(std::string_view text) {
  if (text == "E" || text == "e") return Variable::E;
  if (text == "D" || text == "d") return Variable::D;
  throw Error(ErrorCode::UsageError, "recode target must be E or D, got '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Sign algebra.

inline bool admits_non_decreasing(MonotoneSign s) {
  return s == MonotoneSign::NonDecreasing || s == MonotoneSign::Flat;
}
inline bool admits_non_increasing(MonotoneSign s) {
  return s == MonotoneSign::NonIncreasing || s == MonotoneSign::Flat;
}
inline bool admits_non_positive(InteractionSign s) {
  return s == InteractionSign::NonPositive || s == InteractionSign::Zero;
}
inline bool admits_non_negative(InteractionSign s) {
  return s == InteractionSign::NonNegative || s == InteractionSign::Zero;
}

namespace detail {

// A table flat in one binary argument has identical slices in the other,
// so its monotonicity there is consistent even when it was not stated.
inline bool flat_absorbs(MonotoneSign a, MonotoneSign b) {
  return a == MonotoneSign::Flat || b == MonotoneSign::Flat;
}

}  // namespace detail

/// E and D move selection in the same direction.
inline bool same_direction(MonotoneSign sign_d, MonotoneSign sign_e) {
  if (detail::flat_absorbs(sign_d, sign_e)) return true;
  return (admits_non_decreasing(sign_d) && admits_non_decreasing(sign_e)) ||
         (admits_non_increasing(sign_d) && admits_non_increasing(sign_e));
}

/// E and D move selection in opposite directions.
inline bool opposite_direction(MonotoneSign sign_d, MonotoneSign sign_e) {
  if (detail::flat_absorbs(sign_d, sign_e)) return true;
  return (admits_non_decreasing(sign_d) && admits_non_increasing(sign_e)) ||
         (admits_non_increasing(sign_d) && admits_non_decreasing(sign_e));
}

inline MonotoneSign flipped(MonotoneSign s) {
  if (s == MonotoneSign::NonDecreasing) return MonotoneSign::NonIncreasing;
  if (s == MonotoneSign::NonIncreasing) return MonotoneSign::NonDecreasing;
  return s;
}

inline InteractionSign flipped(InteractionSign s) {
  if (s == InteractionSign::NonPositive) return InteractionSign::NonNegative;
  if (s == InteractionSign::NonNegative) return InteractionSign::NonPositive;
  return s;
}

inline Direction mirrored(Direction d) {
  if (d == Direction::SelectedIsLowerBound) return Direction::SelectedIsUpperBound;
  if (d == Direction::SelectedIsUpperBound) return Direction::SelectedIsLowerBound;
  return d;
}

// ---------------------------------------------------------------------------
// classify

namespace detail {

inline std::string scale_name(Scale s) {
  switch (s) {
    case Scale::RiskRatio: return "risk ratio";
    case Scale::OddsRatio: return "odds ratio";
    case Scale::RiskDifference: return "risk difference";
  }
  return "";
}

inline BoundVerdict classify_risk_ratio(const QualitativeAssumptions& a) {
  BoundVerdict v;
  v.rationale.monotonicity_used = false;
  v.rationale.notes.emplace_back(
      "monotonicity inputs unused: on the risk ratio scale the sign of Inter_RR - 1 decides the bound");
  switch (a.interaction_sign) {
    case InteractionSign::Zero:
      v.direction = Direction::Equal;
      v.applied_result = AppliedResult::R1;
      v.rationale.hypotheses.emplace_back("Inter_RR = 1");
      break;
    case InteractionSign::NonPositive:
      v.direction = Direction::SelectedIsLowerBound;
      v.applied_result = AppliedResult::R4a;
      v.rationale.hypotheses.emplace_back("Inter_RR <= 1");
      v.rationale.notes.emplace_back(
          "R4a is also stated with same-direction monotonicity; the weaker sufficient condition is used");
      break;
    case InteractionSign::NonNegative:
      v.direction = Direction::SelectedIsUpperBound;
      v.applied_result = AppliedResult::R4b;
      v.rationale.hypotheses.emplace_back("Inter_RR >= 1");
      v.rationale.notes.emplace_back(
          "R4b is also stated with opposite monotonicity; the weaker sufficient condition is used");
      break;
    case InteractionSign::Unknown:
      v.rationale.unmet.emplace_back("sign of the risk ratio interaction of E and D on S");
      break;
  }
  if (v.direction != Direction::Indeterminate) v.rationale.rules_fired.push_back(v.applied_result);
  return v;
}

}  // namespace detail

/// Maps assumptions to a bound direction. Never throws.
inline BoundVerdict classify(const QualitativeAssumptions& a) {
  if (a.scale == Scale::RiskRatio) return detail::classify_risk_ratio(a);

  const bool odds_scale = a.scale == Scale::OddsRatio;
  const bool zero = a.interaction_sign == InteractionSign::Zero;
  const bool same = same_direction(a.sign_d, a.sign_e);
  const bool opposite = opposite_direction(a.sign_d, a.sign_e);

  std::optional<AppliedResult> lower;
  std::optional<AppliedResult> upper;
  if (admits_non_positive(a.interaction_sign) && same) {
    lower = zero ? (odds_scale ? AppliedResult::R2a : AppliedResult::R3a) : AppliedResult::R4a;
  }
  if (admits_non_negative(a.interaction_sign) && opposite) {
    upper = zero ? (odds_scale ? AppliedResult::R2b : AppliedResult::R3b) : AppliedResult::R4b;
  }

  BoundVerdict v;
  v.rationale.monotonicity_used = true;
  const std::string scale = detail::scale_name(a.scale);
  if (detail::flat_absorbs(a.sign_d, a.sign_e) &&
      (a.sign_d == MonotoneSign::Unknown || a.sign_e == MonotoneSign::Unknown)) {
    v.rationale.notes.emplace_back(
        "flat in one argument: the slices in the other argument coincide, so its monotonicity is consistent");
  }
  if (lower) {
    v.rationale.rules_fired.push_back(*lower);
    v.rationale.hypotheses.emplace_back(std::string(zero ? "zero" : "non-positive") +
                                        " interaction on the " + scale + " scale");
    v.rationale.hypotheses.emplace_back("same-direction monotonicity in d and e");
  }
  if (upper) {
    v.rationale.rules_fired.push_back(*upper);
    v.rationale.hypotheses.emplace_back(std::string(zero ? "zero" : "non-negative") +
                                        " interaction on the " + scale + " scale");
    v.rationale.hypotheses.emplace_back("opposite monotonicity in d and e");
  }

  if (lower && upper) {
    v.direction = Direction::Equal;
    v.applied_result = *lower;
    v.rationale.notes.emplace_back("lower- and upper-bound rules both hold, so the odds ratios are equal");
  } else if (lower) {
    v.direction = Direction::SelectedIsLowerBound;
    v.applied_result = *lower;
  } else if (upper) {
    v.direction = Direction::SelectedIsUpperBound;
    v.applied_result = *upper;
  } else {
    auto& unmet = v.rationale.unmet;
    if (a.interaction_sign == InteractionSign::Unknown)
      unmet.emplace_back("sign of the " + scale + " interaction of E and D on S");
    if (a.sign_d == MonotoneSign::Unknown && !detail::flat_absorbs(a.sign_d, a.sign_e))
      unmet.emplace_back("monotonicity of P(S=1|d,e) in d");
    if (a.sign_e == MonotoneSign::Unknown && !detail::flat_absorbs(a.sign_d, a.sign_e))
      unmet.emplace_back("monotonicity of P(S=1|d,e) in e");
    if (a.interaction_sign == InteractionSign::NonPositive && opposite)
      unmet.emplace_back(
          "a non-positive interaction needs same-direction monotonicity, but d and e act in opposite directions");
    if (a.interaction_sign == InteractionSign::NonNegative && same)
      unmet.emplace_back(
          "no sufficient condition covers a non-negative interaction with same-direction monotonicity");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Numeric extraction.

namespace detail {

// Direction of a pair of slice differences; ties within tol count as flat.
inline MonotoneSign sign_of_slices(double diff_a, double diff_b, double tol) {
  const auto classify_one = [tol](double diff) {
    if (diff > tol) return 1;
    if (diff < -tol) return -1;
    return 0;
  };
  const int a = classify_one(diff_a);
  const int b = classify_one(diff_b);
  if (a == 0 && b == 0) return MonotoneSign::Flat;
  if (a >= 0 && b >= 0) return MonotoneSign::NonDecreasing;
  if (a <= 0 && b <= 0) return MonotoneSign::NonIncreasing;
  return MonotoneSign::Unknown;
}

inline InteractionSign sign_of_interaction(double value, double tol) {
  if (std::abs(value) <= tol) return InteractionSign::Zero;
  return value < 0.0 ? InteractionSign::NonPositive : InteractionSign::NonNegative;
}

}  // namespace detail

/// Deviation of the interaction from "none" on the given scale:
/// Inter_OR - 1, Inter_RD, or Inter_RR - 1.
inline double interaction_deviation(const SelectionModel& s, Scale scale) {
  switch (scale) {
    case Scale::OddsRatio: return inter_or(s) - 1.0;
    case Scale::RiskDifference: return inter_rd(s);
    case Scale::RiskRatio: return inter_rr(s) - 1.0;
  }
  return 0.0;
}

inline QualitativeAssumptions derive_assumptions(const SelectionModel& s, Scale scale,
                                                 double tol = kProbabilityTolerance) {
  QualitativeAssumptions a;
  a.scale = scale;
  a.sign_d = detail::sign_of_slices(s.pi(1, 0) - s.pi(0, 0), s.pi(1, 1) - s.pi(0, 1), tol);
  a.sign_e = detail::sign_of_slices(s.pi(0, 1) - s.pi(0, 0), s.pi(1, 1) - s.pi(1, 0), tol);
  a.interaction_sign = detail::sign_of_interaction(interaction_deviation(s, scale), tol);
  return a;
}

namespace detail {

inline bool consistent_with(Direction d, double inter_rr_value) {
  const double dev = inter_rr_value - 1.0;
  switch (d) {
    case Direction::SelectedIsLowerBound: return dev <= kRatioTolerance;
    case Direction::SelectedIsUpperBound: return dev >= -kRatioTolerance;
    case Direction::Equal: return std::abs(dev) <= kRatioTolerance;
    case Direction::Indeterminate: return true;
  }
  return true;
}

}  // namespace detail

/// classify(derive_assumptions(...)) with the verdict checked against the
/// exact Inter_RR (and the exact odds ratios when a target is supplied).
///
/// A tolerance wider than rounding error can snap a near-tie to Flat or
/// Zero and license a verdict the exact numbers contradict. Such verdicts
/// are downgraded to Indeterminate. A contradiction that persists with
/// zero tolerance is an implementation bug and throws InternalConsistency.
inline BoundVerdict classify_numeric(const std::optional<TargetJoint>& target,
                                     const SelectionModel& s, Scale scale,
                                     double tol = kProbabilityTolerance) {
  BoundVerdict v = classify(derive_assumptions(s, scale, tol));
  if (v.direction == Direction::Indeterminate) return v;

  double ir = 0.0;
  try {
    ir = inter_rr(s);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::ZeroCell) throw;
    v.rationale.notes.emplace_back("cross-check skipped: Inter_RR undefined for this table");
    return v;
  }
  CrossCheck check;
  check.inter_rr = ir;
  bool ok = detail::consistent_with(v.direction, ir);
  if (target) {
    const Decomposition dec = decomposition(*target, s);
    check.or_sel = dec.or_sel;
    check.or_true = dec.or_true;
    ok = ok && detail::consistent_with(v.direction, dec.or_sel / dec.or_true);
  }
  v.cross_check = check;
  if (ok) return v;

  const BoundVerdict strict = classify(derive_assumptions(s, scale, 0.0));
  if (tol == 0.0 || (strict.direction != Direction::Indeterminate &&
                     !detail::consistent_with(strict.direction, ir))) {
    throw Error(ErrorCode::InternalConsistency,
                "verdict " + std::string(to_string(v.direction)) +
                    " contradicts exact Inter_RR = " + std::to_string(ir));
  }
  BoundVerdict downgraded;
  downgraded.cross_check = check;
  downgraded.rationale.monotonicity_used = v.rationale.monotonicity_used;
  downgraded.rationale.unmet.emplace_back(
      "tolerance " + std::to_string(tol) + " snapped a near-tie; the exact Inter_RR " +
      std::to_string(ir) + " contradicts the tolerant verdict " +
      std::string(to_string(v.direction)));
  return downgraded;
}

// ---------------------------------------------------------------------------
// Recoding.

inline SelectionModel recode(const SelectionModel& s, Variable which) {
  Cells c{};
  for (int d = 0; d < 2; ++d) {
    for (int e = 0; e < 2; ++e) {
      const int sd = which == Variable::D ? 1 - d : d;
      const int se = which == Variable::E ? 1 - e : e;
      c[detail::cell_index(d, e)] = s.pi(sd, se);
    }
  }
  return SelectionModel::from_cells(c);
}

inline TargetJoint recode(const TargetJoint& t, Variable which) {
  Cells c{};
  for (int d = 0; d < 2; ++d) {
    for (int e = 0; e < 2; ++e) {
      const int sd = which == Variable::D ? 1 - d : d;
      const int se = which == Variable::E ? 1 - e : e;
      c[detail::cell_index(d, e)] = t.p(se, sd);
    }
  }
  return TargetJoint::from_cells(c);
}

/// Relabelling one variable flips its monotonicity and the interaction sign
/// on every scale.
inline QualitativeAssumptions recode(const QualitativeAssumptions& a, Variable which) {
  QualitativeAssumptions out = a;
  if (which == Variable::D) {
    out.sign_d = flipped(a.sign_d);
  } else {
    out.sign_e = flipped(a.sign_e);
  }
  out.interaction_sign = flipped(a.interaction_sign);
  return out;
}

// ---------------------------------------------------------------------------
// Strata.

struct Stratum {
  std::string label;
  QualitativeAssumptions assumptions;
};

struct StratumVerdict {
  std::string label;
  BoundVerdict verdict;
};

/// Per-stratum classification. Strata are never pooled.
inline std::vector<StratumVerdict> stratified_classify(const std::vector<Stratum>& strata) {
  if (strata.empty()) {
    throw Error(ErrorCode::InvalidArgument, "stratified classification needs at least one stratum");
  }
  std::vector<StratumVerdict> out;
  out.reserve(strata.size());
  for (const auto& s : strata) out.push_back({s.label, classify(s.assumptions)});
  return out;
}

}  // namespace biasbound
