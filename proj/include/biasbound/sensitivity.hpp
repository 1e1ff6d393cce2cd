#pragma once

// Sensitivity adjustment of an observed odds ratio by an assumed Inter_RR,
// Woolf intervals for observed 2x2 counts, and bound reporting.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "biasbound/classify.hpp"
#include "biasbound/error.hpp"
#include "biasbound/measures.hpp"

namespace biasbound {

using CountCells = std::array<std::uint64_t, 4>;

/// Counts n[d][e] from the selected sample.
class ObservedTable {
 public:
  /// Counts in I/O order.
  static ObservedTable from_cells(const CountCells& c) {
    ObservedTable t;
    std::uint64_t total = 0;
    for (int d = 0; d < 2; ++d) {
      for (int e = 0; e < 2; ++e) {
        t.n_[d][e] = c[detail::cell_index(d, e)];
        total += t.n_[d][e];
      }
    }
    if (total == 0) throw Error(ErrorCode::ValidationError, "counts: total count must be positive");
    return t;
  }

  std::uint64_t n(int d, int e) const { return n_[d][e]; }

  CountCells cells() const {
    CountCells c{};
    for (int d = 0; d < 2; ++d)
      for (int e = 0; e < 2; ++e) c[detail::cell_index(d, e)] = n_[d][e];
    return c;
  }

  friend bool operator==(const ObservedTable&, const ObservedTable&) = default;

 private:
  ObservedTable() = default;
  std::array<std::array<std::uint64_t, 2>, 2> n_{};
};

inline ObservedTable recode(const ObservedTable& t, Variable which) {
  CountCells c{};
  for (int d = 0; d < 2; ++d) {
    for (int e = 0; e < 2; ++e) {
      const int sd = which == Variable::D ? 1 - d : d;
      const int se = which == Variable::E ? 1 - e : e;
      c[detail::cell_index(d, e)] = t.n(sd, se);
    }
  }
  return ObservedTable::from_cells(c);
}

struct IntervalEstimate {
  double point = 1.0;
  double lo = 1.0;
  double hi = 1.0;
  std::optional<double> level;  // empty for a bare point estimate

  static IntervalEstimate make(double point, double lo, double hi, std::optional<double> level) {
    if (!(point > 0.0) || !(lo > 0.0) || !(hi > 0.0) || !std::isfinite(hi) || !std::isfinite(point)) {
      throw Error(ErrorCode::InvalidArgument, "odds ratio estimate and limits must be positive and finite");
    }
    if (!(lo <= point && point <= hi)) {
      throw Error(ErrorCode::InvalidArgument, "confidence limits must satisfy lo <= point <= hi");
    }
    if (level && !(*level > 0.0 && *level < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0,1)");
    }
    return {point, lo, hi, level};
  }

  static IntervalEstimate point_only(double point) { return make(point, point, point, std::nullopt); }
};

/// Range of OR_true implied by a range of Inter_RR values.
struct AdjustedRange {
  double point_lo = 1.0;
  double point_hi = 1.0;
  double lo = 1.0;
  double hi = 1.0;
  std::optional<double> level;
  double inter_rr_lo = 1.0;
  double inter_rr_hi = 1.0;
};

/// OR_true = OR_sel / Inter_RR.
inline double adjust_or(double or_sel, double inter_rr_value) {
  if (!(or_sel > 0.0) || !(inter_rr_value > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "adjust_or needs a positive odds ratio and a positive Inter_RR");
  }
  return or_sel / inter_rr_value;
}

inline AdjustedRange adjust_interval(const IntervalEstimate& est, double inter_rr_lo, double inter_rr_hi) {
  if (!(inter_rr_lo > 0.0) || !(inter_rr_lo <= inter_rr_hi) || !std::isfinite(inter_rr_hi)) {
    throw Error(ErrorCode::InvalidArgument, "Inter_RR range must satisfy 0 < lo <= hi < inf");
  }
  AdjustedRange out;
  out.point_lo = est.point / inter_rr_hi;
  out.point_hi = est.point / inter_rr_lo;
  out.lo = est.lo / inter_rr_hi;
  out.hi = est.hi / inter_rr_lo;
  out.level = est.level;
  out.inter_rr_lo = inter_rr_lo;
  out.inter_rr_hi = inter_rr_hi;
  return out;
}

/// Standard normal quantile. Acklam's rational approximation followed by one
/// Halley step against erfc; absolute error well below 1e-12 on (1e-300, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "normal quantile needs p in (0,1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement.
  const double err = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

/// Woolf log-odds-ratio interval. With `continuity_correction` 0.5 is added
/// to every cell first; without it a zero cell is an error.
inline IntervalEstimate woolf_ci(const ObservedTable& t, double level = 0.95,
                                 bool continuity_correction = false) {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0,1)");
  }
  std::array<std::array<double, 2>, 2> n{};
  for (int d = 0; d < 2; ++d) {
    for (int e = 0; e < 2; ++e) {
      n[d][e] = static_cast<double>(t.n(d, e)) + (continuity_correction ? 0.5 : 0.0);
      if (!(n[d][e] > 0.0)) {
        throw Error(ErrorCode::ZeroCell,
                    "Woolf interval undefined: zero count in cell " + detail::cell_name(d, e) +
                        " (enable the continuity correction to add 0.5 to every cell)");
      }
    }
  }
  const double point = (n[1][1] * n[0][0]) / (n[1][0] * n[0][1]);
  const double se = std::sqrt(1.0 / n[1][1] + 1.0 / n[1][0] + 1.0 / n[0][1] + 1.0 / n[0][0]);
  const double z = normal_quantile(0.5 + level / 2.0);
  const double log_point = std::log(point);
  return IntervalEstimate{point, std::exp(log_point - z * se), std::exp(log_point + z * se), level};
}

struct BoundReport {
  Direction direction = Direction::Indeterminate;
  AppliedResult applied_result = AppliedResult::None;
  std::string statement;
  std::optional<double> or_true_at_least;         // point lower bound on OR_true
  std::optional<double> or_true_at_most;          // point upper bound on OR_true
  std::optional<double> confidence_at_least;      // confidence-limit version
  std::optional<double> confidence_at_most;
  std::vector<std::string> unmet;
};

namespace detail {

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string percent(double level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", level * 100.0);
  return buf;
}

}  // namespace detail

inline BoundReport bound_report(const IntervalEstimate& est, const BoundVerdict& verdict) {
  using detail::short_number;
  BoundReport r;
  r.direction = verdict.direction;
  r.applied_result = verdict.applied_result;
  const bool has_ci = est.level.has_value() && (est.lo < est.point || est.hi > est.point);
  const std::string via = " (" + std::string(to_string(verdict.applied_result)) + ")";

  switch (verdict.direction) {
    case Direction::SelectedIsLowerBound:
      r.or_true_at_least = est.point;
      r.statement = "OR_true ≥ " + short_number(est.point);
      if (has_ci) {
        r.confidence_at_least = est.lo;
        r.statement += " (and ≥ " + short_number(est.lo) + " at " + detail::percent(*est.level) +
                       " confidence)";
      }
      r.statement += via;
      break;
    case Direction::SelectedIsUpperBound:
      r.or_true_at_most = est.point;
      r.statement = "OR_true ≤ " + short_number(est.point);
      if (has_ci) {
        r.confidence_at_most = est.hi;
        r.statement += " (and ≤ " + short_number(est.hi) + " at " + detail::percent(*est.level) +
                       " confidence)";
      }
      r.statement += via;
      break;
    case Direction::Equal:
      r.or_true_at_least = est.point;
      r.or_true_at_most = est.point;
      r.statement = "OR_true = " + short_number(est.point);
      if (has_ci) {
        r.confidence_at_least = est.lo;
        r.confidence_at_most = est.hi;
        r.statement += " (" + detail::percent(*est.level) + " interval " + short_number(est.lo) + " to " +
                       short_number(est.hi) + ")";
      }
      r.statement += via;
      break;
    case Direction::Indeterminate:
      r.unmet = verdict.rationale.unmet;
      r.statement = "no conclusion about OR_true from the observed " + short_number(est.point);
      if (!r.unmet.empty()) {
        r.statement += "; unmet: ";
        for (std::size_t i = 0; i < r.unmet.size(); ++i) {
          if (i > 0) r.statement += "; ";
          r.statement += r.unmet[i];
        }
      }
      break;
  }
  return r;
}

}  // namespace biasbound
