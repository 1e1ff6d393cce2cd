#pragma once

// Association and interaction measures for a binary exposure E, a binary
// outcome D and a binary selection indicator S.
//
// Every four-number object is exchanged in the cell order
//   (d=1,e=1), (d=1,e=0), (d=0,e=1), (d=0,e=0).

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "biasbound/error.hpp"

namespace biasbound {

using Cells = std::array<double, 4>;

/// Absolute tolerance on input probabilities.
inline constexpr double kProbabilityTolerance = 1e-12;
/// Relative tolerance on derived ratios.
inline constexpr double kRatioTolerance = 1e-10;

namespace detail {

inline std::string cell_name(int d, int e) {
  return "(d=" + std::to_string(d) + ",e=" + std::to_string(e) + ")";
}

// Cell position in the I/O order for indices (d, e).
constexpr std::size_t cell_index(int d, int e) {
  return static_cast<std::size_t>((1 - d) * 2 + (1 - e));
}

inline void check_probability(double v, int d, int e, const char* what) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw Error(ErrorCode::ValidationError,
                std::string(what) + " " + cell_name(d, e) +
                    ": probability out of range: " + std::to_string(v));
  }
}

}  // namespace detail

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Joint law of (E, D) in the target population.
class TargetJoint {
 public:
  /// Cells in I/O order. Throws ValidationError on a broken invariant.
  static TargetJoint from_cells(const Cells& c) {
    TargetJoint t;
    for (int d = 0; d < 2; ++d) {
      for (int e = 0; e < 2; ++e) {
        const double v = c[detail::cell_index(d, e)];
        detail::check_probability(v, d, e, "target");
        t.p_[e][d] = v;
      }
    }
    const double total = t.p_[0][0] + t.p_[0][1] + t.p_[1][0] + t.p_[1][1];
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw Error(ErrorCode::ValidationError,
                  "target: probabilities must sum to 1, got " + std::to_string(total));
    }
    return t;
  }

  static TargetJoint uniform() { return from_cells({0.25, 0.25, 0.25, 0.25}); }

  /// P(E=e, D=d).
  double p(int e, int d) const { return p_[e][d]; }

  Cells cells() const {
    Cells c{};
    for (int d = 0; d < 2; ++d)
      for (int e = 0; e < 2; ++e) c[detail::cell_index(d, e)] = p_[e][d];
    return c;
  }

  friend bool operator==(const TargetJoint&, const TargetJoint&) = default;

 private:
  TargetJoint() = default;
  std::array<std::array<double, 2>, 2> p_{};  // [e][d]
};

/// Selection probabilities P(S=1 | D=d, E=e).
class SelectionModel {
 public:
  /// Cells in I/O order. Throws ValidationError on a broken invariant.
  static SelectionModel from_cells(const Cells& c) {
    SelectionModel s;
    bool any_positive = false;
    for (int d = 0; d < 2; ++d) {
      for (int e = 0; e < 2; ++e) {
        const double v = c[detail::cell_index(d, e)];
        detail::check_probability(v, d, e, "selection");
        s.pi_[d][e] = v;
        any_positive = any_positive || v > 0.0;
      }
    }
    if (!any_positive) {
      throw Error(ErrorCode::ValidationError,
                  "selection: all probabilities are zero, the selected population is empty");
    }
    return s;
  }

  static SelectionModel constant(double c) { return from_cells({c, c, c, c}); }

  /// P(S=1 | D=d, E=e).
  double pi(int d, int e) const { return pi_[d][e]; }

  Cells cells() const {
    Cells c{};
    for (int d = 0; d < 2; ++d)
      for (int e = 0; e < 2; ++e) c[detail::cell_index(d, e)] = pi_[d][e];
    return c;
  }

  /// Same model with every probability multiplied by `factor`.
  SelectionModel scaled(double factor) const {
    Cells c = cells();
    for (double& v : c) v *= factor;
    return from_cells(c);
  }

  friend bool operator==(const SelectionModel&, const SelectionModel&) = default;

 private:
  SelectionModel() = default;
  std::array<std::array<double, 2>, 2> pi_{};  // [d][e]
};

/// Saturated logistic model logit P(S=1|d,e) = b0 + b1 d + b2 e + b3 d e.
struct LogisticParams {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;

  double linear_predictor(int d, int e) const {
    return beta0 + beta1 * d + beta2 * e + beta3 * d * e;
  }
  double probability(int d, int e) const { return expit(linear_predictor(d, e)); }

  SelectionModel to_selection() const {
    return SelectionModel::from_cells(
        {probability(1, 1), probability(1, 0), probability(0, 1), probability(0, 0)});
  }
};

/// Saturated linear probability model P(S=1|d,e) = g0 + g1 d + g2 e + g3 d e.
struct LinearParams {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;

  double probability(int d, int e) const {
    return gamma0 + gamma1 * d + gamma2 * e + gamma3 * d * e;
  }

  /// Throws ValidationError when some cell leaves [0, 1].
  SelectionModel to_selection() const {
    return SelectionModel::from_cells(
        {probability(1, 1), probability(1, 0), probability(0, 1), probability(0, 0)});
  }
};

struct InteractionSummary {
  double inter_rr = 1.0;
  std::optional<double> inter_or;  // empty when some pi is 0 or 1
  double inter_rd = 0.0;
};

struct Decomposition {
  double or_sel = 1.0;
  double or_true = 1.0;
  double inter_rr = 1.0;
};

/// Cross-product ratio p11 p00 / (p10 p01) of the (E, D) law.
inline double true_or(const TargetJoint& t) {
  for (int e = 0; e < 2; ++e) {
    for (int d = 0; d < 2; ++d) {
      if (!(t.p(e, d) > 0.0)) {
        throw Error(ErrorCode::ZeroCell,
                    "odds ratio undefined: zero cell " + detail::cell_name(d, e));
      }
    }
  }
  return (t.p(1, 1) * t.p(0, 0)) / (t.p(1, 0) * t.p(0, 1));
}

/// P(D=1|E=1) / P(D=1|E=0).
inline double risk_ratio(const TargetJoint& t) {
  const double n1 = t.p(1, 0) + t.p(1, 1);
  const double n0 = t.p(0, 0) + t.p(0, 1);
  if (!(n1 > 0.0) || !(n0 > 0.0) || !(t.p(0, 1) > 0.0)) {
    throw Error(ErrorCode::ZeroCell, "risk ratio undefined: zero risk in the unexposed or empty exposure group");
  }
  return (t.p(1, 1) / n1) / (t.p(0, 1) / n0);
}

/// P(D=1|E=1) - P(D=1|E=0).
inline double risk_difference(const TargetJoint& t) {
  const double n1 = t.p(1, 0) + t.p(1, 1);
  const double n0 = t.p(0, 0) + t.p(0, 1);
  if (!(n1 > 0.0) || !(n0 > 0.0)) {
    throw Error(ErrorCode::ZeroCell, "risk difference undefined: empty exposure group");
  }
  return t.p(1, 1) / n1 - t.p(0, 1) / n0;
}

/// Law of (E, D) given S = 1.
inline TargetJoint selected_joint(const TargetJoint& t, const SelectionModel& s) {
  double norm = 0.0;
  for (int e = 0; e < 2; ++e)
    for (int d = 0; d < 2; ++d) norm += t.p(e, d) * s.pi(d, e);
  if (!(norm > 0.0)) {
    throw Error(ErrorCode::EmptySelection, "selected population has probability zero");
  }
  Cells q{};
  for (int d = 0; d < 2; ++d)
    for (int e = 0; e < 2; ++e) q[detail::cell_index(d, e)] = t.p(e, d) * s.pi(d, e) / norm;
  // Renormalisation can leave the sum a few ulps away from 1; the tolerance
  // in from_cells is far wider than that.
  return TargetJoint::from_cells(q);
}

/// Odds ratio of E and D in the selected population.
inline double selected_or(const TargetJoint& t, const SelectionModel& s) {
  return true_or(selected_joint(t, s));
}

/// Multiplicative interaction of D and E on S on the risk ratio scale.
/// Needs pi(1,0) > 0 and pi(0,1) > 0; zero when pi(1,1) or pi(0,0) is zero.
inline double inter_rr(const SelectionModel& s) {
  for (const auto& [d, e] : {std::pair{1, 0}, std::pair{0, 1}}) {
    if (!(s.pi(d, e) > 0.0)) {
      throw Error(ErrorCode::ZeroCell,
                  "Inter_RR undefined: zero selection probability in denominator cell " +
                      detail::cell_name(d, e));
    }
  }
  return (s.pi(1, 1) * s.pi(0, 0)) / (s.pi(1, 0) * s.pi(0, 1));
}

namespace detail {

inline void require_interior(const SelectionModel& s, const char* what) {
  for (int d = 0; d < 2; ++d) {
    for (int e = 0; e < 2; ++e) {
      const double v = s.pi(d, e);
      if (!(v > 0.0 && v < 1.0)) {
        throw Error(ErrorCode::Boundary, std::string(what) +
                                             " undefined: selection probability in " +
                                             cell_name(d, e) + " is " + std::to_string(v) +
                                             ", odds need a value strictly inside (0,1)");
      }
    }
  }
}

inline double odds(double p) { return p / (1.0 - p); }

}  // namespace detail

/// OR_{ES|D=1} / OR_{ES|D=0}; equals OR_{DS|E=1} / OR_{DS|E=0}.
inline double inter_or(const SelectionModel& s) {
  detail::require_interior(s, "Inter_OR");
  const double or_es_d1 = detail::odds(s.pi(1, 1)) / detail::odds(s.pi(1, 0));
  const double or_es_d0 = detail::odds(s.pi(0, 1)) / detail::odds(s.pi(0, 0));
  return or_es_d1 / or_es_d0;
}

/// RD_{ES|D=1} - RD_{ES|D=0}.
inline double inter_rd(const SelectionModel& s) {
  return (s.pi(1, 1) - s.pi(1, 0)) - (s.pi(0, 1) - s.pi(0, 0));
}

inline LogisticParams fit_logistic(const SelectionModel& s) {
  detail::require_interior(s, "logistic fit");
  LogisticParams b;
  b.beta0 = logit(s.pi(0, 0));
  b.beta1 = logit(s.pi(1, 0)) - b.beta0;
  b.beta2 = logit(s.pi(0, 1)) - b.beta0;
  b.beta3 = logit(s.pi(1, 1)) - b.beta0 - b.beta1 - b.beta2;
  return b;
}

inline LinearParams fit_linear(const SelectionModel& s) {
  LinearParams g;
  g.gamma0 = s.pi(0, 0);
  g.gamma1 = s.pi(1, 0) - s.pi(0, 0);
  g.gamma2 = s.pi(0, 1) - s.pi(0, 0);
  // Same expression as inter_rd so the two agree bit for bit.
  g.gamma3 = inter_rd(s);
  return g;
}

inline InteractionSummary interaction_summary(const SelectionModel& s) {
  InteractionSummary out;
  out.inter_rr = inter_rr(s);
  try {
    out.inter_or = inter_or(s);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::Boundary) throw;
  }
  out.inter_rd = inter_rd(s);
  return out;
}

/// OR_{ED|S=1} = OR_{ED} x Inter_RR, with the identity checked.
inline Decomposition decomposition(const TargetJoint& t, const SelectionModel& s) {
  Decomposition out;
  out.or_true = true_or(t);
  out.inter_rr = inter_rr(s);
  out.or_sel = selected_or(t, s);
  const double rel = std::abs(out.or_sel - out.or_true * out.inter_rr) / out.or_sel;
  if (!(rel <= kRatioTolerance)) {
    throw Error(ErrorCode::InternalConsistency,
                "decomposition identity violated, relative residual " + std::to_string(rel));
  }
  return out;
}

enum class Collapsibility { None, ConstantInD, ConstantInE, ConstantInBoth };

/// Whether pi is constant in d (D independent of S given E) or in e.
inline Collapsibility collapsibility(const SelectionModel& s,
                                     double tol = kProbabilityTolerance) {
  const bool flat_d = std::abs(s.pi(1, 0) - s.pi(0, 0)) <= tol &&
                      std::abs(s.pi(1, 1) - s.pi(0, 1)) <= tol;
  const bool flat_e = std::abs(s.pi(0, 1) - s.pi(0, 0)) <= tol &&
                      std::abs(s.pi(1, 1) - s.pi(1, 0)) <= tol;
  if (flat_d && flat_e) return Collapsibility::ConstantInBoth;
  if (flat_d) return Collapsibility::ConstantInD;
  if (flat_e) return Collapsibility::ConstantInE;
  return Collapsibility::None;
}

}  // namespace biasbound
