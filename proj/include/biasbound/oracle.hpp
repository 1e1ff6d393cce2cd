#pragma once

// Brute-force verification of the bound results by sampling selection
// models, checks of the saturated-model identities, and a finite-sample
// study simulator.
//
// Reproducibility contract: the model index space is cut into fixed-size
// blocks; block b draws from its own generator seeded by (seed, b). Workers
// take whole blocks and partial results are merged in block order, so every
// report is a function of (config, seed) alone.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "biasbound/classify.hpp"
#include "biasbound/error.hpp"
#include "biasbound/measures.hpp"

namespace biasbound {

enum class ResultId { R1, R2a, R2b, R3a, R3b, R4aRR, R4aOR, R4aRD, R4bRR, R4bOR, R4bRD };

inline constexpr std::array<ResultId, 11> kAllResults = {
    ResultId::R1,    ResultId::R2a,   ResultId::R2b,   ResultId::R3a,   ResultId::R3b,  ResultId::R4aRR,
    ResultId::R4aOR, ResultId::R4aRD, ResultId::R4bRR, ResultId::R4bOR, ResultId::R4bRD};

/// Sampling constraints: one per result, plus the unconstrained cube and the
/// exploration regions (same-direction monotonicity with a positive
/// interaction on one scale), where no bound is claimed.
enum class Constraint {
  None, R1, R2a, R2b, R3a, R3b, R4aRR, R4aOR, R4aRD, R4bRR, R4bOR, R4bRD,
  ExploreRR, ExploreOR, ExploreRD,
};

enum class SamplerMode { UniformRandom, Grid };

inline std::string_view to_string(ResultId id) {
  switch (id) {
    case ResultId::R1: return "R1";
    case ResultId::R2a: return "R2a";
    case ResultId::R2b: return "R2b";
    case ResultId::R3a: return "R3a";
    case ResultId::R3b: return "R3b";
    case ResultId::R4aRR: return "R4a-RR";
    case ResultId::R4aOR: return "R4a-OR";
    case ResultId::R4aRD: return "R4a-RD";
    case ResultId::R4bRR: return "R4b-RR";
    case ResultId::R4bOR: return "R4b-OR";
    case ResultId::R4bRD: return "R4b-RD";
  }
  return "";
}

inline std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::None: return "none";
    case Constraint::ExploreRR: return "explore-RR";
    case Constraint::ExploreOR: return "explore-OR";
    case Constraint::ExploreRD: return "explore-RD";
    default: break;
  }
  return to_string(static_cast<ResultId>(static_cast<int>(c) - 1));
}

inline std::string_view to_string(SamplerMode m) {
  return m == SamplerMode::Grid ? "grid" : "random";
}

inline ResultId parse_result_id(std::string_view text) {
  for (ResultId id : kAllResults)
    if (to_string(id) == text) return id;
  throw Error(ErrorCode::UsageError, "unknown result identifier '" + std::string(text) + "'");
}

inline Constraint parse_constraint(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(Constraint::ExploreRD); ++i) {
    const auto c = static_cast<Constraint>(i);
    if (to_string(c) == text) return c;
  }
  throw Error(ErrorCode::UsageError, "unknown sampler constraint '" + std::string(text) + "'");
}

inline Constraint constraint_for(ResultId id) {
  return static_cast<Constraint>(static_cast<int>(id) + 1);
}

inline Scale scale_of(ResultId id) {
  switch (id) {
    case ResultId::R1:
    case ResultId::R4aRR:
    case ResultId::R4bRR: return Scale::RiskRatio;
    case ResultId::R2a:
    case ResultId::R2b:
    case ResultId::R4aOR:
    case ResultId::R4bOR: return Scale::OddsRatio;
    default: return Scale::RiskDifference;
  }
}

struct SamplerConfig {
  SamplerMode mode = SamplerMode::UniformRandom;
  std::uint64_t count = 1000;  // models for UniformRandom, lattice resolution for Grid
  std::uint64_t seed = 0;
  Constraint constraint = Constraint::None;
  double tol = kProbabilityTolerance;  // tolerance of the hypothesis checks
  unsigned workers = 1;                // 0 = hardware concurrency

  static SamplerConfig random(std::uint64_t count, std::uint64_t seed,
                              Constraint constraint = Constraint::None) {
    SamplerConfig cfg;
    cfg.count = count;
    cfg.seed = seed;
    cfg.constraint = constraint;
    return cfg;
  }

  static SamplerConfig grid(std::uint64_t resolution, Constraint constraint = Constraint::None) {
    SamplerConfig cfg;
    cfg.mode = SamplerMode::Grid;
    cfg.count = resolution;
    cfg.constraint = constraint;
    return cfg;
  }

  void validate() const {
    if (mode == SamplerMode::UniformRandom && count < 1)
      throw Error(ErrorCode::InvalidArgument, "sampler count must be at least 1");
    if (mode == SamplerMode::Grid && count < 2)
      throw Error(ErrorCode::InvalidArgument, "grid resolution must be at least 2");
    if (mode == SamplerMode::Grid && count > 1000)
      throw Error(ErrorCode::InvalidArgument, "grid resolution above 1000 is not supported");
    if (!(tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be non-negative");
  }
};

/// Selection probabilities are drawn from (kSamplerEpsilon, 1 - kSamplerEpsilon).
inline constexpr double kSamplerEpsilon = 1e-6;
/// Attempts allowed per emitted model before rejection gives up.
inline constexpr std::uint64_t kRejectionCap = 10'000'000;
/// Models per generator block.
inline constexpr std::uint64_t kBlockSize = 4096;
/// Tolerance on the Inter_RR conclusion of a result.
inline constexpr double kConclusionTolerance = 1e-9;

namespace detail {

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t block, std::uint32_t domain) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), domain};
    rng_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double open_probability() {
    return kSamplerEpsilon + (1.0 - 2.0 * kSamplerEpsilon) * unit();
  }

 private:
  std::mt19937_64 rng_;
};

inline constexpr std::uint32_t kSamplerDomain = 0x53414d50;    // "SAMP"
inline constexpr std::uint32_t kSimulatorDomain = 0x53494d55;  // "SIMU"

inline bool in_open_range(double v) {
  return v > kSamplerEpsilon && v < 1.0 - kSamplerEpsilon;
}

// Exact (tolerance-free) monotonicity predicates used to build samples.
inline bool up_in_d(const SelectionModel& s) { return s.pi(1, 0) >= s.pi(0, 0) && s.pi(1, 1) >= s.pi(0, 1); }
inline bool down_in_d(const SelectionModel& s) { return s.pi(1, 0) <= s.pi(0, 0) && s.pi(1, 1) <= s.pi(0, 1); }
inline bool up_in_e(const SelectionModel& s) { return s.pi(0, 1) >= s.pi(0, 0) && s.pi(1, 1) >= s.pi(1, 0); }
inline bool down_in_e(const SelectionModel& s) { return s.pi(0, 1) <= s.pi(0, 0) && s.pi(1, 1) <= s.pi(1, 0); }

inline bool exact_same_direction(const SelectionModel& s) {
  return (up_in_d(s) && up_in_e(s)) || (down_in_d(s) && down_in_e(s));
}
inline bool exact_opposite_direction(const SelectionModel& s) {
  return (up_in_d(s) && down_in_e(s)) || (down_in_d(s) && up_in_e(s));
}

enum class Solve { Nothing, RiskRatio, OddsRatio, RiskDifference };

inline Solve solved_cell(Constraint c) {
  switch (c) {
    case Constraint::R1: return Solve::RiskRatio;
    case Constraint::R2a:
    case Constraint::R2b: return Solve::OddsRatio;
    case Constraint::R3a:
    case Constraint::R3b: return Solve::RiskDifference;
    default: return Solve::Nothing;
  }
}

// Build a model from the three free cells (pi10, pi01, pi00) and, unless the
// constraint fixes it, pi11. Returns nothing when the constraint fails.
inline std::optional<SelectionModel> build(Constraint c, double pi10, double pi01, double pi00, double pi11) {
  switch (solved_cell(c)) {
    case Solve::RiskRatio: pi11 = pi10 * pi01 / pi00; break;
    case Solve::OddsRatio: pi11 = expit(logit(pi10) + logit(pi01) - logit(pi00)); break;
    case Solve::RiskDifference: pi11 = pi10 + pi01 - pi00; break;
    case Solve::Nothing: break;
  }
  if (!in_open_range(pi11)) return std::nullopt;
  const SelectionModel s = SelectionModel::from_cells({pi11, pi10, pi01, pi00});
  // A solved cell near 0 or 1 is ill-conditioned; drop tables whose
  // rounded interaction misses zero by more than the tolerance.
  switch (solved_cell(c)) {
    case Solve::RiskRatio:
      if (std::abs(inter_rr(s) - 1.0) > kProbabilityTolerance) return std::nullopt;
      break;
    case Solve::OddsRatio:
      if (std::abs(inter_or(s) - 1.0) > kProbabilityTolerance) return std::nullopt;
      break;
    case Solve::RiskDifference:
      if (std::abs(inter_rd(s)) > kProbabilityTolerance) return std::nullopt;
      break;
    case Solve::Nothing: break;
  }
  switch (c) {
    case Constraint::None:
    case Constraint::R1: return s;
    case Constraint::R2a:
    case Constraint::R3a: return exact_same_direction(s) ? std::optional(s) : std::nullopt;
    case Constraint::R2b:
    case Constraint::R3b: return exact_opposite_direction(s) ? std::optional(s) : std::nullopt;
    case Constraint::R4aRR: return inter_rr(s) <= 1.0 ? std::optional(s) : std::nullopt;
    case Constraint::R4bRR: return inter_rr(s) >= 1.0 ? std::optional(s) : std::nullopt;
    case Constraint::R4aOR:
      return inter_or(s) <= 1.0 && exact_same_direction(s) ? std::optional(s) : std::nullopt;
    case Constraint::R4bOR:
      return inter_or(s) >= 1.0 && exact_opposite_direction(s) ? std::optional(s) : std::nullopt;
    case Constraint::R4aRD:
      return inter_rd(s) <= 0.0 && exact_same_direction(s) ? std::optional(s) : std::nullopt;
    case Constraint::R4bRD:
      return inter_rd(s) >= 0.0 && exact_opposite_direction(s) ? std::optional(s) : std::nullopt;
    case Constraint::ExploreRR:
      return inter_rr(s) > 1.0 && exact_same_direction(s) ? std::optional(s) : std::nullopt;
    case Constraint::ExploreOR:
      return inter_or(s) > 1.0 && exact_same_direction(s) ? std::optional(s) : std::nullopt;
    case Constraint::ExploreRD:
      return inter_rd(s) > 0.0 && exact_same_direction(s) ? std::optional(s) : std::nullopt;
  }
  return std::nullopt;
}

inline SelectionModel draw(Constraint c, Stream& stream) {
  for (std::uint64_t attempt = 0; attempt < kRejectionCap; ++attempt) {
    const double pi10 = stream.open_probability();
    const double pi01 = stream.open_probability();
    const double pi00 = stream.open_probability();
    const double pi11 = solved_cell(c) == Solve::Nothing ? stream.open_probability() : 0.5;
    if (auto s = build(c, pi10, pi01, pi00, pi11)) return *s;
  }
  throw Error(ErrorCode::RejectionExhausted,
              "sampler: constraint " + std::string(to_string(c)) + " not met after " +
                  std::to_string(kRejectionCap) + " attempts");
}

struct IndexedModel {
  std::uint64_t index;  // draw index (random) or lattice index (grid)
  SelectionModel model;
};

inline std::uint64_t grid_free_cells(Constraint c) { return solved_cell(c) == Solve::Nothing ? 4 : 3; }

inline std::uint64_t ipow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

/// Number of index slots the configuration spans.
inline std::uint64_t index_space(const SamplerConfig& cfg) {
  if (cfg.mode == SamplerMode::UniformRandom) return cfg.count;
  return ipow(cfg.count, grid_free_cells(cfg.constraint));
}

inline std::uint64_t block_count(const SamplerConfig& cfg) {
  return (index_space(cfg) + kBlockSize - 1) / kBlockSize;
}

/// Models of one block, in index order.
inline std::vector<IndexedModel> block_models(const SamplerConfig& cfg, std::uint64_t block) {
  const std::uint64_t begin = block * kBlockSize;
  const std::uint64_t end = std::min(index_space(cfg), begin + kBlockSize);
  std::vector<IndexedModel> out;
  out.reserve(end - begin);
  if (cfg.mode == SamplerMode::UniformRandom) {
    Stream stream(cfg.seed, block, kSamplerDomain);
    for (std::uint64_t i = begin; i < end; ++i) out.push_back({i, draw(cfg.constraint, stream)});
    return out;
  }
  const std::uint64_t k = cfg.count;
  const auto lattice = [k](std::uint64_t j) { return static_cast<double>(j + 1) / static_cast<double>(k + 1); };
  for (std::uint64_t i = begin; i < end; ++i) {
    std::uint64_t rest = i;
    std::array<double, 4> v{0.5, 0.5, 0.5, 0.5};
    for (std::uint64_t c = 0; c < grid_free_cells(cfg.constraint); ++c) {
      v[c] = lattice(rest % k);
      rest /= k;
    }
    if (auto s = build(cfg.constraint, v[0], v[1], v[2], v[3])) out.push_back({i, *s});
  }
  return out;
}

inline unsigned resolve_workers(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(block) for every block on up to `workers` threads and returns the
/// results in block order.
template <typename Partial>
std::vector<Partial> run_blocks(std::uint64_t blocks, unsigned workers,
                                const std::function<Partial(std::uint64_t)>& fn) {
  std::vector<Partial> partials(blocks);
  const unsigned n = static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(workers), std::max<std::uint64_t>(blocks, 1)));
  if (n <= 1) {
    for (std::uint64_t b = 0; b < blocks; ++b) partials[b] = fn(b);
    return partials;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (unsigned w = 0; w < n; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::uint64_t b = w; b < blocks; b += n) partials[b] = fn(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return partials;
}

}  // namespace detail

/// Deterministic sequence of selection models for a configuration.
inline std::vector<SelectionModel> sample_models(const SamplerConfig& cfg) {
  cfg.validate();
  std::vector<SelectionModel> out;
  for (std::uint64_t b = 0; b < detail::block_count(cfg); ++b) {
    for (auto& m : detail::block_models(cfg, b)) out.push_back(m.model);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hypotheses and conclusions.

/// Whether a model meets the hypotheses of a result, judged from the
/// assumptions extracted at tolerance `tol`. Risk-ratio-scale clauses of
/// R4 use the sign of Inter_RR - 1 alone.
inline bool hypotheses_hold(ResultId id, const SelectionModel& s, double tol) {
  const QualitativeAssumptions a = derive_assumptions(s, scale_of(id), tol);
  const bool same = same_direction(a.sign_d, a.sign_e);
  const bool opposite = opposite_direction(a.sign_d, a.sign_e);
  const InteractionSign i = a.interaction_sign;
  switch (id) {
    case ResultId::R1: return i == InteractionSign::Zero;
    case ResultId::R2a:
    case ResultId::R3a: return i == InteractionSign::Zero && same;
    case ResultId::R2b:
    case ResultId::R3b: return i == InteractionSign::Zero && opposite;
    case ResultId::R4aRR: return admits_non_positive(i);
    case ResultId::R4bRR: return admits_non_negative(i);
    case ResultId::R4aOR:
    case ResultId::R4aRD: return admits_non_positive(i) && same;
    case ResultId::R4bOR:
    case ResultId::R4bRD: return admits_non_negative(i) && opposite;
  }
  return false;
}

/// OR_sel = OR_true (R1), OR_sel <= OR_true (a-parts) or OR_sel >= OR_true
/// (b-parts), stated through Inter_RR.
inline bool conclusion_holds(ResultId id, double inter_rr_value) {
  const double dev = inter_rr_value - 1.0;
  switch (id) {
    case ResultId::R1: return std::abs(dev) <= kConclusionTolerance;
    case ResultId::R2a:
    case ResultId::R3a:
    case ResultId::R4aRR:
    case ResultId::R4aOR:
    case ResultId::R4aRD: return dev <= kConclusionTolerance;
    default: return dev >= -kConclusionTolerance;
  }
}

struct ModelHit {
  std::uint64_t index = 0;
  SelectionModel model = SelectionModel::constant(1.0);
  double inter_rr = 1.0;
};

struct VerificationReport {
  ResultId result_id = ResultId::R1;
  SamplerMode mode = SamplerMode::UniformRandom;
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  Constraint constraint = Constraint::None;
  double tol = kProbabilityTolerance;
  std::uint64_t models_tested = 0;
  std::uint64_t models_satisfying_conditions = 0;
  std::uint64_t violations = 0;
  std::optional<ModelHit> first_violation;

  bool passed() const { return violations == 0; }
};

inline VerificationReport verify_result(ResultId id, const SamplerConfig& cfg) {
  cfg.validate();
  struct Partial {
    std::uint64_t tested = 0;
    std::uint64_t satisfying = 0;
    std::uint64_t violations = 0;
    std::optional<ModelHit> first;
  };
  const auto partials = detail::run_blocks<Partial>(
      detail::block_count(cfg), cfg.workers, [&](std::uint64_t block) {
        Partial p;
        for (const auto& [index, model] : detail::block_models(cfg, block)) {
          ++p.tested;
          if (!hypotheses_hold(id, model, cfg.tol)) continue;
          ++p.satisfying;
          const double ir = inter_rr(model);
          if (!conclusion_holds(id, ir)) {
            ++p.violations;
            if (!p.first) p.first = ModelHit{index, model, ir};
          }
        }
        return p;
      });

  VerificationReport r;
  r.result_id = id;
  r.mode = cfg.mode;
  r.count = cfg.count;
  r.seed = cfg.seed;
  r.constraint = cfg.constraint;
  r.tol = cfg.tol;
  for (const auto& p : partials) {
    r.models_tested += p.tested;
    r.models_satisfying_conditions += p.satisfying;
    r.violations += p.violations;
    if (!r.first_violation && p.first) r.first_violation = p.first;
  }
  return r;
}

/// A model that satisfies the conclusion of `id` while violating its
/// sufficient conditions. For R1, whose hypothesis is the conclusion itself,
/// the conditions searched against are the collapsibility conditions
/// (pi constant in d or in e).
inline std::optional<ModelHit> find_nonnecessity_witness(ResultId id, const SamplerConfig& cfg) {
  cfg.validate();
  for (std::uint64_t b = 0; b < detail::block_count(cfg); ++b) {
    for (const auto& [index, model] : detail::block_models(cfg, b)) {
      const bool sufficient = id == ResultId::R1
                                  ? collapsibility(model, cfg.tol) != Collapsibility::None
                                  : hypotheses_hold(id, model, cfg.tol);
      if (sufficient) continue;
      const double ir = inter_rr(model);
      if (conclusion_holds(id, ir)) return ModelHit{index, model, ir};
    }
  }
  return std::nullopt;
}

/// Where Inter_RR falls for models with same-direction monotonicity and a
/// positive interaction on one scale. Nothing is asserted here.
struct ExplorationReport {
  Scale scale = Scale::OddsRatio;
  std::uint64_t models_tested = 0;
  std::uint64_t below_one = 0;
  std::uint64_t equal_one = 0;
  std::uint64_t above_one = 0;
};

inline ExplorationReport explore_positive_interaction(Scale scale, SamplerConfig cfg) {
  cfg.constraint = scale == Scale::RiskRatio   ? Constraint::ExploreRR
                   : scale == Scale::OddsRatio ? Constraint::ExploreOR
                                               : Constraint::ExploreRD;
  cfg.validate();
  ExplorationReport r;
  r.scale = scale;
  for (std::uint64_t b = 0; b < detail::block_count(cfg); ++b) {
    for (const auto& m : detail::block_models(cfg, b)) {
      ++r.models_tested;
      const double dev = inter_rr(m.model) - 1.0;
      if (std::abs(dev) <= kConclusionTolerance) {
        ++r.equal_one;
      } else if (dev < 0.0) {
        ++r.below_one;
      } else {
        ++r.above_one;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Saturated-model identities.

struct IdentityCheck {
  bool passed = true;
  bool applicable = true;  // false when no inequality is claimed for the signs
  double residual = 0.0;   // scaled by the magnitude of the terms involved
  double lhs = 0.0;        // 1/A - 1/B, or Inter_RR for the linear identity
  double rhs = 0.0;
};

/// With beta3 = 0: 1/A - 1/B = exp(-b0)(1 - exp(-b1))(1 - exp(-b2)), where
/// A = expit(b0) expit(b0+b1+b2) and B = expit(b0+b1) expit(b0+b2).
/// With beta3 != 0 (A uses b0+b1+b2+b3): b3 < 0 and b1 b2 >= 0 give
/// 1/A - 1/B >= that product >= 0; b3 > 0 and b1 b2 <= 0 give <= and <= 0.
inline IdentityCheck check_logistic_identity(const LogisticParams& b, double tol) {
  const double inv_a = 1.0 / (expit(b.beta0) * expit(b.beta0 + b.beta1 + b.beta2 + b.beta3));
  const double inv_b = 1.0 / (expit(b.beta0 + b.beta1) * expit(b.beta0 + b.beta2));
  const double product = std::exp(-b.beta0) * (1.0 - std::exp(-b.beta1)) * (1.0 - std::exp(-b.beta2));
  const double scale = std::max({1.0, inv_a, inv_b});

  IdentityCheck r;
  r.lhs = inv_a - inv_b;
  r.rhs = product;
  if (b.beta3 == 0.0) {
    r.residual = std::abs(r.lhs - r.rhs) / scale;
    r.passed = r.residual <= tol;
    return r;
  }
  const double b12 = b.beta1 * b.beta2;
  const double slack = tol * scale;
  if (b.beta3 < 0.0 && b12 >= 0.0) {
    // Shortfall below the chain lhs >= product >= 0.
    r.residual = std::max({0.0, (r.rhs - r.lhs) / scale, -r.rhs / scale});
    r.passed = r.lhs >= r.rhs - slack && r.rhs >= -slack;
  } else if (b.beta3 > 0.0 && b12 <= 0.0) {
    r.residual = std::max({0.0, (r.lhs - r.rhs) / scale, r.rhs / scale});
    r.passed = r.lhs <= r.rhs + slack && r.rhs <= slack;
  } else {
    r.applicable = false;
  }
  return r;
}

/// Inter_RR of the linear-probability model equals
/// 1 - g1 g2 / ((g0+g1)(g0+g2)) + g0 g3 / ((g0+g1)(g0+g2)).
inline IdentityCheck check_linear_identity(const LinearParams& g, double tol) {
  const SelectionModel s = g.to_selection();  // validates the [0,1] invariant
  const double d1 = g.gamma0 + g.gamma1;
  const double d2 = g.gamma0 + g.gamma2;
  if (!(d1 > 0.0) || !(d2 > 0.0)) {
    throw Error(ErrorCode::ZeroCell, "linear identity needs gamma0+gamma1 > 0 and gamma0+gamma2 > 0");
  }
  const double denom = d1 * d2;
  IdentityCheck r;
  r.lhs = inter_rr(s);
  r.rhs = 1.0 - g.gamma1 * g.gamma2 / denom + g.gamma0 * g.gamma3 / denom;
  const double scale = std::max({1.0, std::abs(g.gamma1 * g.gamma2 / denom), std::abs(g.gamma0 * g.gamma3 / denom)});
  r.residual = std::abs(r.lhs - r.rhs) / scale;
  r.passed = r.residual <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// Finite-sample simulation.

/// counts[e][d][s].
using StudyCounts = std::array<std::array<std::array<std::uint64_t, 2>, 2>, 2>;

struct SimulationResult {
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  StudyCounts counts{};
  std::uint64_t selected = 0;
  double empirical_selected_or = 1.0;
};

/// Individuals per simulation block.
inline constexpr std::uint64_t kSimulationBlock = 1u << 16;

/// Draws n individuals from the target law, selects each with probability
/// pi(d, e), and tabulates. Throws DegenerateSample when a selected cell is
/// empty.
inline SimulationResult simulate_study(const TargetJoint& target, const SelectionModel& sel,
                                       std::uint64_t n, std::uint64_t seed, unsigned workers = 1) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "simulation needs n >= 1");
  // Cumulative law over (e, d) in the order (0,0), (0,1), (1,0), (1,1).
  std::array<double, 3> cumulative{};
  cumulative[0] = target.p(0, 0);
  cumulative[1] = cumulative[0] + target.p(0, 1);
  cumulative[2] = cumulative[1] + target.p(1, 0);

  const std::uint64_t blocks = (n + kSimulationBlock - 1) / kSimulationBlock;
  const auto partials = detail::run_blocks<StudyCounts>(blocks, workers, [&](std::uint64_t block) {
    StudyCounts c{};
    detail::Stream stream(seed, block, detail::kSimulatorDomain);
    const std::uint64_t end = std::min(n, (block + 1) * kSimulationBlock);
    for (std::uint64_t i = block * kSimulationBlock; i < end; ++i) {
      const double u = stream.unit();
      const int cell = u < cumulative[0] ? 0 : u < cumulative[1] ? 1 : u < cumulative[2] ? 2 : 3;
      const int e = cell / 2;
      const int d = cell % 2;
      const int s = stream.unit() < sel.pi(d, e) ? 1 : 0;
      ++c[e][d][s];
    }
    return c;
  });

  SimulationResult r;
  r.n = n;
  r.seed = seed;
  for (const auto& c : partials)
    for (int e = 0; e < 2; ++e)
      for (int d = 0; d < 2; ++d)
        for (int s = 0; s < 2; ++s) r.counts[e][d][s] += c[e][d][s];
  for (int e = 0; e < 2; ++e) {
    for (int d = 0; d < 2; ++d) {
      r.selected += r.counts[e][d][1];
      if (r.counts[e][d][1] == 0) {
        throw Error(ErrorCode::DegenerateSample,
                    "simulated sample has no selected individuals in cell " + detail::cell_name(d, e) +
                        "; retry with a larger n");
      }
    }
  }
  const auto sel_count = [&r](int e, int d) { return static_cast<double>(r.counts[e][d][1]); };
  r.empirical_selected_or = (sel_count(1, 1) * sel_count(0, 0)) / (sel_count(1, 0) * sel_count(0, 1));
  return r;
}

}  // namespace biasbound
