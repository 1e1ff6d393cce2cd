#pragma once

// Command-line front end. `run` is the whole program minus process setup so
// tests can drive it in-process.
//
// Exit codes: 0 success, 1 input/validation/usage error, 2 undefined
// quantity (zero cells, boundary probabilities, degenerate samples),
// 3 verification failure, 4 internal consistency failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biasbound/classify.hpp"
#include "biasbound/error.hpp"
#include "biasbound/io.hpp"
#include "biasbound/measures.hpp"
#include "biasbound/oracle.hpp"
#include "biasbound/sensitivity.hpp"

namespace biasbound::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInputError = 1,
  kUndefinedQuantity = 2,
  kVerificationFailure = 3,
  kInternalError = 4,
};

inline int exit_code_for(ErrorCode code) {
  if (code == ErrorCode::InternalConsistency) return kInternalError;
  if (is_undefined_quantity(code)) return kUndefinedQuantity;
  return kInputError;
}

namespace detail {

using biasbound::json;

struct Options {
  std::string input;
  std::string format;  // json | csv | "" (from extension)
  std::optional<std::string> scale;
  double tol = kProbabilityTolerance;

  // adjust
  std::optional<double> point;
  std::optional<double> lo;
  std::optional<double> hi;
  double level = 0.95;
  bool correction = false;
  std::optional<double> inter_rr;
  std::vector<double> inter_rr_range;

  // verify / simulate
  std::string result;
  std::uint64_t n = 100000;
  std::optional<std::uint64_t> seed;
  std::string mode = "random";
  std::uint64_t resolution = 10;
  unsigned workers = 1;
  std::string constraint;

  // recode
  std::string which;
};

inline std::uint64_t default_seed() {
  const char* env = std::getenv("BIASBOUND_SEED");
  if (env == nullptr || *env == '\0') return 0;
  const std::string text(env);
  if (text.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorCode::UsageError, "BIASBOUND_SEED must be a non-negative integer, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::UsageError, "BIASBOUND_SEED out of range: '" + text + "'");
  }
}

inline InputDocument read_document(const Options& opt, std::istream& in) {
  std::string bytes;
  if (opt.input.empty() || opt.input == "-") {
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    std::ifstream file(opt.input, std::ios::binary);
    if (!file) throw Error(ErrorCode::UsageError, "cannot open input file '" + opt.input + "'");
    bytes.assign(std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>());
  }
  InputFormat format = InputFormat::StructuredText;
  if (opt.format == "csv") {
    format = InputFormat::DelimitedTable;
  } else if (opt.format.empty() && opt.input.size() >= 4 &&
             opt.input.compare(opt.input.size() - 4, 4, ".csv") == 0) {
    format = InputFormat::DelimitedTable;
  }
  return parse_input(bytes, format);
}

template <typename T>
const T& require(const std::optional<T>& block, const char* name, const char* command) {
  if (!block) {
    throw Error(ErrorCode::UsageError,
                std::string(command) + ": input document is missing the required '" + name + "' block");
  }
  return *block;
}

inline json report_header(const char* command) {
  return {{"schema_version", kSchemaVersion}, {"command", command}};
}

// Evaluates fn, returning its JSON value or null with the reason recorded.
template <typename Fn>
json try_measure(const char* key, json& undefined, Fn&& fn) {
  try {
    return json(fn());
  } catch (const Error& err) {
    if (!is_undefined_quantity(err.code())) throw;
    undefined[key] = err.what();
    return nullptr;
  }
}

inline json association_json(const TargetJoint& t, json& undefined, const std::string& prefix) {
  json out = {{"cells", cells_json(t.cells())}};
  out["or"] = try_measure((prefix + "or").c_str(), undefined, [&] { return true_or(t); });
  out["rr"] = try_measure((prefix + "rr").c_str(), undefined, [&] { return risk_ratio(t); });
  out["rd"] = try_measure((prefix + "rd").c_str(), undefined, [&] { return risk_difference(t); });
  return out;
}

inline std::string_view to_string(Collapsibility c) {
  switch (c) {
    case Collapsibility::None: return "none";
    case Collapsibility::ConstantInD: return "constant_in_d";
    case Collapsibility::ConstantInE: return "constant_in_e";
    case Collapsibility::ConstantInBoth: return "constant_in_both";
  }
  return "none";
}

inline json run_measures(const Options& opt, const InputDocument& doc) {
  if (!doc.target && !doc.selection) {
    throw Error(ErrorCode::UsageError, "measures: input document needs a 'target' or 'selection' block");
  }
  json out = report_header("measures");
  json undefined = json::object();

  // A requested scale makes its interaction measure mandatory.
  if (opt.scale) {
    const Scale scale = parse_scale(*opt.scale);
    out["scale"] = to_string(scale);
    const SelectionModel& sel = require(doc.selection, "selection", "measures --scale");
    out["interaction"] = interaction_deviation(sel, scale) + (scale == Scale::RiskDifference ? 0.0 : 1.0);
  }
  if (doc.target) out["target"] = association_json(*doc.target, undefined, "target.");
  if (doc.selection) {
    const SelectionModel& sel = *doc.selection;
    out["selection"] = cells_json(sel.cells());
    out["inter_rr"] = try_measure("inter_rr", undefined, [&] { return inter_rr(sel); });
    out["inter_or"] = try_measure("inter_or", undefined, [&] { return inter_or(sel); });
    out["inter_rd"] = inter_rd(sel);
    out["logistic"] = try_measure("logistic", undefined, [&] {
      const LogisticParams b = fit_logistic(sel);
      return json{{"beta0", b.beta0}, {"beta1", b.beta1}, {"beta2", b.beta2}, {"beta3", b.beta3}};
    });
    const LinearParams g = fit_linear(sel);
    out["linear"] = {{"gamma0", g.gamma0}, {"gamma1", g.gamma1}, {"gamma2", g.gamma2}, {"gamma3", g.gamma3}};
    out["collapsibility"] = to_string(collapsibility(sel));
  }
  if (doc.target && doc.selection) {
    out["selected"] = try_measure("selected", undefined, [&] {
      return association_json(selected_joint(*doc.target, *doc.selection), undefined, "selected.");
    });
    out["decomposition"] = try_measure("decomposition", undefined, [&] {
      const Decomposition dec = decomposition(*doc.target, *doc.selection);
      return json{{"or_sel", dec.or_sel}, {"or_true", dec.or_true}, {"inter_rr", dec.inter_rr}};
    });
  }
  out["undefined"] = undefined;
  return out;
}

inline BoundVerdict verdict_for(const Options& opt, const std::optional<TargetJoint>& target,
                                const std::optional<SelectionModel>& selection,
                                const std::optional<QualitativeAssumptions>& assumptions, json& used) {
  if (opt.scale && selection) {
    const Scale scale = parse_scale(*opt.scale);
    used = to_json(derive_assumptions(*selection, scale, opt.tol));
    return classify_numeric(target, *selection, scale, opt.tol);
  }
  if (assumptions) {
    used = to_json(*assumptions);
    return classify(*assumptions);
  }
  throw Error(ErrorCode::UsageError,
              "classify: input document needs an 'assumptions' block, or a 'selection' block with --scale");
}

inline json run_classify(const Options& opt, const InputDocument& doc) {
  json out = report_header("classify");
  if (!doc.strata.empty()) {
    json strata = json::array();
    for (const auto& s : doc.strata) {
      json used;
      const BoundVerdict v = verdict_for(opt, s.target, s.selection, s.assumptions, used);
      strata.push_back({{"label", s.label}, {"assumptions", used}, {"verdict", to_json(v)}});
    }
    out["strata"] = strata;
    return out;
  }
  json used;
  const BoundVerdict v = verdict_for(opt, doc.target, doc.selection, doc.assumptions, used);
  out["assumptions"] = used;
  out["verdict"] = to_json(v);
  return out;
}

inline json run_adjust(const Options& opt, const std::optional<InputDocument>& doc) {
  json out = report_header("adjust");
  IntervalEstimate est;
  if (opt.point) {
    const bool has_limits = opt.lo.has_value() || opt.hi.has_value();
    est = IntervalEstimate::make(*opt.point, opt.lo.value_or(*opt.point), opt.hi.value_or(*opt.point),
                                 has_limits ? std::optional<double>(opt.level) : std::nullopt);
  } else if (doc && doc->counts) {
    est = woolf_ci(*doc->counts, opt.level, opt.correction);
    out["counts"] = counts_json(doc->counts->cells());
  } else {
    throw Error(ErrorCode::UsageError, "adjust: give --point, or an input document with a 'counts' block");
  }
  out["estimate"] = to_json(est);

  const bool have_range = !opt.inter_rr_range.empty();
  if (opt.inter_rr && have_range) {
    throw Error(ErrorCode::UsageError, "adjust: --inter-rr and --inter-rr-range are mutually exclusive");
  }
  const std::optional<QualitativeAssumptions> assumptions =
      doc ? doc->assumptions : std::optional<QualitativeAssumptions>{};
  if (!opt.inter_rr && !have_range && !assumptions) {
    throw Error(ErrorCode::UsageError,
                "adjust: give --inter-rr or --inter-rr-range, or an input document with an 'assumptions' block");
  }
  if (opt.inter_rr || have_range) {
    const double lo = opt.inter_rr ? *opt.inter_rr : opt.inter_rr_range[0];
    const double hi = opt.inter_rr ? *opt.inter_rr : opt.inter_rr_range[1];
    out["adjusted"] = to_json(adjust_interval(est, lo, hi));
  }
  if (assumptions) {
    out["assumptions"] = to_json(*assumptions);
    out["bound_report"] = to_json(bound_report(est, classify(*assumptions)));
  }
  return out;
}

inline SamplerConfig sampler_config(const Options& opt, ResultId id) {
  SamplerConfig cfg;
  cfg.mode = opt.mode == "grid" ? SamplerMode::Grid : SamplerMode::UniformRandom;
  cfg.count = cfg.mode == SamplerMode::Grid ? opt.resolution : opt.n;
  cfg.seed = opt.seed ? *opt.seed : default_seed();
  cfg.constraint = opt.constraint.empty() ? constraint_for(id) : parse_constraint(opt.constraint);
  cfg.tol = opt.tol;
  cfg.workers = opt.workers;
  return cfg;
}

inline json run_verify(const Options& opt, bool& failed) {
  std::vector<ResultId> ids;
  if (opt.result == "all") {
    ids.assign(kAllResults.begin(), kAllResults.end());
  } else {
    ids.push_back(parse_result_id(opt.result));
  }
  std::vector<json> reports;
  for (ResultId id : ids) {
    const VerificationReport r = verify_result(id, sampler_config(opt, id));
    failed = failed || !r.passed();
    reports.push_back(to_json(r));
  }
  if (reports.size() == 1) return reports.front();
  json out = report_header("verify");
  out["reports"] = reports;
  out["passed"] = !failed;
  return out;
}

inline json run_simulate(const Options& opt, const InputDocument& doc) {
  const TargetJoint& target = require(doc.target, "target", "simulate");
  const SelectionModel& sel = require(doc.selection, "selection", "simulate");
  const std::uint64_t seed = opt.seed ? *opt.seed : default_seed();
  json out = report_header("simulate");
  out["target"] = cells_json(target.cells());
  out["selection"] = cells_json(sel.cells());
  out.update(to_json(simulate_study(target, sel, opt.n, seed, opt.workers)));
  json undefined = json::object();
  out["population_selected_or"] = try_measure("population_selected_or", undefined,
                                              [&] { return selected_or(target, sel); });
  out["undefined"] = undefined;
  return out;
}

}  // namespace detail

/// Runs one CLI invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  detail::Options opt;
  CLI::App app{"Direction and sensitivity analysis of selection bias in 2x2 odds ratios", "biasbound"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "biasbound 1.0.0");

  const auto add_input = [&opt](CLI::App* sub) {
    sub->add_option("-i,--input", opt.input, "Input document path, '-' for stdin");
    sub->add_option("-f,--format", opt.format, "Input format (json or csv; default from extension)")
        ->check(CLI::IsMember({"json", "csv"}));
  };

  auto* measures = app.add_subcommand("measures", "Association and interaction measures with the decomposition");
  add_input(measures);
  measures->add_option("--scale", opt.scale, "Require the interaction measure on this scale (rr, or, rd)");

  auto* classify_cmd = app.add_subcommand("classify", "Bound verdict from assumptions or a selection model");
  add_input(classify_cmd);
  classify_cmd->add_option("--scale", opt.scale, "Derive assumptions numerically on this scale (rr, or, rd)");
  classify_cmd->add_option("--tol", opt.tol, "Tolerance for ties in the numeric derivation")->check(CLI::NonNegativeNumber);

  auto* adjust = app.add_subcommand("adjust", "Divide an observed odds ratio and its limits by Inter_RR");
  add_input(adjust);
  adjust->add_option("--point", opt.point, "Observed odds ratio")->check(CLI::PositiveNumber);
  adjust->add_option("--lo", opt.lo, "Lower confidence limit")->check(CLI::PositiveNumber);
  adjust->add_option("--hi", opt.hi, "Upper confidence limit")->check(CLI::PositiveNumber);
  adjust->add_option("--level", opt.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  adjust->add_flag("--correction", opt.correction, "Add 0.5 to every count before the Woolf interval");
  adjust->add_option("--inter-rr", opt.inter_rr, "Assumed Inter_RR")->check(CLI::PositiveNumber);
  adjust->add_option("--inter-rr-range", opt.inter_rr_range, "Assumed Inter_RR range LO HI")
      ->expected(2)
      ->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Check a bound result on sampled selection models");
  verify->add_option("--result", opt.result, "Result identifier (R1, R2a, ..., R4b-RD) or 'all'")->required();
  verify->add_option("--n", opt.n, "Number of models (random mode)")->check(CLI::PositiveNumber);
  verify->add_option("--seed", opt.seed, "Seed (default: BIASBOUND_SEED or 0)");
  verify->add_option("--mode", opt.mode, "Sampling mode")->check(CLI::IsMember({"random", "grid"}));
  verify->add_option("--resolution", opt.resolution, "Lattice points per cell (grid mode)")->check(CLI::Range(2, 1000));
  verify->add_option("--workers", opt.workers, "Worker threads (0 = all cores)");
  verify->add_option("--constraint", opt.constraint, "Sampler constraint (default: the result's hypotheses)");
  verify->add_option("--tol", opt.tol, "Tolerance of the hypothesis checks")->check(CLI::NonNegativeNumber);

  auto* simulate = app.add_subcommand("simulate", "Simulate a study and tabulate the selected sample");
  add_input(simulate);
  simulate->add_option("--n", opt.n, "Number of individuals")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", opt.seed, "Seed (default: BIASBOUND_SEED or 0)");
  simulate->add_option("--workers", opt.workers, "Worker threads (0 = all cores)");

  auto* recode_cmd = app.add_subcommand("recode", "Relabel E or D in every block of the document");
  add_input(recode_cmd);
  recode_cmd->add_option("--which", opt.which, "Variable to relabel (E or D)")->required()->check(CLI::IsMember({"E", "D", "e", "d"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error[usage_error]: " << e.what() << "\n";
    return kInputError;
  }

  try {
    json report;
    int code = kSuccess;
    if (measures->parsed()) {
      report = detail::run_measures(opt, detail::read_document(opt, in));
    } else if (classify_cmd->parsed()) {
      report = detail::run_classify(opt, detail::read_document(opt, in));
    } else if (adjust->parsed()) {
      std::optional<InputDocument> doc;
      if (!opt.input.empty()) doc = detail::read_document(opt, in);
      report = detail::run_adjust(opt, doc);
    } else if (verify->parsed()) {
      bool failed = false;
      report = detail::run_verify(opt, failed);
      if (failed) code = kVerificationFailure;
    } else if (simulate->parsed()) {
      report = detail::run_simulate(opt, detail::read_document(opt, in));
    } else if (recode_cmd->parsed()) {
      report = to_json(recode(detail::read_document(opt, in), parse_variable(opt.which)));
    }
    out << report.dump(2) << "\n";
    if (code == kVerificationFailure) err << "error[verification_failure]: violations found\n";
    return code;
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
}

}  // namespace biasbound::cli
