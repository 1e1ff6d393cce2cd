#pragma once

// Input documents and JSON reports.
//
// Structured-text input is one JSON object with optional blocks
//   target, selection      four probabilities in (d,e) cell order
//   counts                 four non-negative integers in the same order
//   assumptions            {sign_d, sign_e, scale, interaction_sign}
//   strata                 [{label, target?, selection?, counts?, assumptions?}]
// Delimited-table input is CSV with a header row naming the cells
// d1e1,d1e0,d0e1,d0e0, optionally preceded by a `block` column.

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasbound/classify.hpp"
#include "biasbound/error.hpp"
#include "biasbound/measures.hpp"
#include "biasbound/oracle.hpp"
#include "biasbound/sensitivity.hpp"

namespace biasbound {

/// Version of the report and document schema in docs/report-schema.json.
inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

enum class InputFormat { StructuredText, DelimitedTable };

struct StratumBlock {
  std::string label;
  std::optional<TargetJoint> target;
  std::optional<SelectionModel> selection;
  std::optional<ObservedTable> counts;
  std::optional<QualitativeAssumptions> assumptions;

  friend bool operator==(const StratumBlock&, const StratumBlock&) = default;
};

struct InputDocument {
  std::optional<TargetJoint> target;
  std::optional<SelectionModel> selection;
  std::optional<ObservedTable> counts;
  std::optional<QualitativeAssumptions> assumptions;
  std::vector<StratumBlock> strata;

  friend bool operator==(const InputDocument&, const InputDocument&) = default;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& where, const std::string& what) {
  throw Error(code, where.empty() ? what : where + ": " + what);
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline Cells read_cells(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    fail(ErrorCode::ValidationError, where, "expected an array of four numbers in (d1e1, d1e0, d0e1, d0e0) order");
  }
  Cells c{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) fail(ErrorCode::ValidationError, where + "[" + std::to_string(i) + "]", "expected a number");
    c[i] = j[i].get<double>();
  }
  return c;
}

inline CountCells read_counts(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    fail(ErrorCode::ValidationError, where, "expected an array of four counts in (d1e1, d1e0, d0e1, d0e0) order");
  }
  CountCells c{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number_unsigned()) {
      fail(ErrorCode::ValidationError, where + "[" + std::to_string(i) + "]", "expected a non-negative integer count");
    }
    c[i] = j[i].get<std::uint64_t>();
  }
  return c;
}

// Wraps a type-invariant failure with the field it came from.
template <typename Fn>
auto validated(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& err) {
    fail(err.code(), where, err.what());
  }
}

inline std::string read_string(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::ValidationError, where, std::string("missing field '") + key + "'");
  if (!it->is_string()) fail(ErrorCode::ValidationError, where + "." + key, "expected a string");
  return it->get<std::string>();
}

inline QualitativeAssumptions read_assumptions(const json& j, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::ValidationError, where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "sign_d" && key != "sign_e" && key != "scale" && key != "interaction_sign") {
      fail(ErrorCode::ValidationError, where + "." + key, "unknown field");
    }
  }
  QualitativeAssumptions a;
  a.scale = validated(where + ".scale", [&] { return parse_scale(read_string(j, "scale", where)); });
  a.interaction_sign = validated(where + ".interaction_sign", [&] {
    return parse_interaction_sign(read_string(j, "interaction_sign", where));
  });
  if (j.contains("sign_d"))
    a.sign_d = validated(where + ".sign_d", [&] { return parse_monotone_sign(read_string(j, "sign_d", where)); });
  if (j.contains("sign_e"))
    a.sign_e = validated(where + ".sign_e", [&] { return parse_monotone_sign(read_string(j, "sign_e", where)); });
  return a;
}

template <typename Block>
void read_blocks(const json& obj, const std::string& prefix, Block& out) {
  if (auto it = obj.find("target"); it != obj.end()) {
    const std::string where = prefix + "target";
    out.target = validated(where, [&] { return TargetJoint::from_cells(read_cells(*it, where)); });
  }
  if (auto it = obj.find("selection"); it != obj.end()) {
    const std::string where = prefix + "selection";
    out.selection = validated(where, [&] { return SelectionModel::from_cells(read_cells(*it, where)); });
  }
  if (auto it = obj.find("counts"); it != obj.end()) {
    const std::string where = prefix + "counts";
    out.counts = validated(where, [&] { return ObservedTable::from_cells(read_counts(*it, where)); });
  }
  if (auto it = obj.find("assumptions"); it != obj.end()) {
    out.assumptions = read_assumptions(*it, prefix + "assumptions");
  }
}

inline InputDocument parse_structured(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    const auto [line, col] = line_column(text, err.byte == 0 ? 0 : err.byte - 1);
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " + std::to_string(col),
         "malformed JSON document");
  }
  if (!root.is_object()) fail(ErrorCode::ParseError, "document", "expected a JSON object at top level");

  for (const auto& [key, value] : root.items()) {
    if (key != "target" && key != "selection" && key != "counts" && key != "assumptions" && key != "strata" &&
        key != "schema_version") {
      fail(ErrorCode::ValidationError, key, "unknown top-level field");
    }
  }
  InputDocument doc;
  read_blocks(root, "", doc);
  if (auto it = root.find("strata"); it != root.end()) {
    if (!it->is_array()) fail(ErrorCode::ValidationError, "strata", "expected an array of strata");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& s = (*it)[i];
      const std::string prefix = "strata[" + std::to_string(i) + "]";
      if (!s.is_object()) fail(ErrorCode::ValidationError, prefix, "expected an object");
      for (const auto& [key, value] : s.items()) {
        if (key != "label" && key != "target" && key != "selection" && key != "counts" && key != "assumptions") {
          fail(ErrorCode::ValidationError, prefix + "." + key, "unknown field");
        }
      }
      StratumBlock block;
      block.label = s.contains("label") ? read_string(s, "label", prefix) : std::to_string(i);
      read_blocks(s, prefix + ".", block);
      doc.strata.push_back(std::move(block));
    }
  }
  return doc;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, where, "expected a number, got '" + s + "'");
  }
  if (used != s.size()) fail(ErrorCode::ParseError, where, "expected a number, got '" + s + "'");
  return v;
}

inline std::uint64_t parse_count(const std::string& s, const std::string& where) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    fail(ErrorCode::ParseError, where, "expected a non-negative integer count, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, where, "count out of range: '" + s + "'");
  }
}

inline InputDocument parse_delimited(std::string_view text) {
  static const std::vector<std::string> kCells = {"d1e1", "d1e0", "d0e1", "d0e0"};
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  bool labelled = false;
  InputDocument doc;
  std::size_t data_rows = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line);
    const std::string where = "line " + std::to_string(line_no);
    if (!have_header) {
      std::vector<std::string> cells = fields;
      if (!cells.empty() && cells.front() == "block") {
        labelled = true;
        cells.erase(cells.begin());
      }
      if (cells != kCells) {
        fail(ErrorCode::ParseError, where, "header must be d1e1,d1e0,d0e1,d0e0 (optionally preceded by block)");
      }
      have_header = true;
      continue;
    }
    const std::size_t expected = labelled ? 5 : 4;
    if (fields.size() != expected) {
      fail(ErrorCode::ParseError, where,
           "expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
    }
    const std::string block = labelled ? fields[0] : "selection";
    const std::size_t offset = labelled ? 1 : 0;
    if (!labelled && ++data_rows > 1) {
      fail(ErrorCode::ParseError, where, "a table without a block column holds exactly one selection row");
    }
    const auto column = [&](std::size_t i) {
      return where + ", column " + std::to_string(i + offset + 1) + " (" + kCells[i] + ")";
    };
    if (block == "counts") {
      CountCells c{};
      for (std::size_t i = 0; i < 4; ++i) c[i] = parse_count(fields[i + offset], column(i));
      if (doc.counts) fail(ErrorCode::ValidationError, where, "duplicate counts row");
      doc.counts = validated(where, [&] { return ObservedTable::from_cells(c); });
      continue;
    }
    Cells c{};
    for (std::size_t i = 0; i < 4; ++i) c[i] = parse_number(fields[i + offset], column(i));
    if (block == "target") {
      if (doc.target) fail(ErrorCode::ValidationError, where, "duplicate target row");
      doc.target = validated(where, [&] { return TargetJoint::from_cells(c); });
    } else if (block == "selection") {
      if (doc.selection) fail(ErrorCode::ValidationError, where, "duplicate selection row");
      doc.selection = validated(where, [&] { return SelectionModel::from_cells(c); });
    } else {
      fail(ErrorCode::ValidationError, where + ", column 1", "unknown block '" + block + "'");
    }
  }
  if (!have_header) fail(ErrorCode::ParseError, "line 1", "missing header row");
  return doc;
}

}  // namespace detail

/// Parses and validates an input document. Throws Error with ParseError or
/// ValidationError and a location prefix.
inline InputDocument parse_input(std::string_view bytes, InputFormat format) {
  return format == InputFormat::StructuredText ? detail::parse_structured(bytes)
                                               : detail::parse_delimited(bytes);
}

// ---------------------------------------------------------------------------
// Serialization.

inline json cells_json(const Cells& c) { return json::array({c[0], c[1], c[2], c[3]}); }
inline json counts_json(const CountCells& c) { return json::array({c[0], c[1], c[2], c[3]}); }

inline json to_json(const QualitativeAssumptions& a) {
  return {{"sign_d", to_string(a.sign_d)},
          {"sign_e", to_string(a.sign_e)},
          {"scale", to_string(a.scale)},
          {"interaction_sign", to_string(a.interaction_sign)}};
}

namespace detail {

template <typename Block>
void write_blocks(json& out, const Block& b) {
  if (b.target) out["target"] = cells_json(b.target->cells());
  if (b.selection) out["selection"] = cells_json(b.selection->cells());
  if (b.counts) out["counts"] = counts_json(b.counts->cells());
  if (b.assumptions) out["assumptions"] = to_json(*b.assumptions);
}

}  // namespace detail

inline json to_json(const InputDocument& doc) {
  json out = json::object();
  out["schema_version"] = kSchemaVersion;
  detail::write_blocks(out, doc);
  if (!doc.strata.empty()) {
    json strata = json::array();
    for (const auto& s : doc.strata) {
      json j = {{"label", s.label}};
      detail::write_blocks(j, s);
      strata.push_back(std::move(j));
    }
    out["strata"] = std::move(strata);
  }
  return out;
}

inline std::string serialize(const InputDocument& doc) { return to_json(doc).dump(2) + "\n"; }

inline InputDocument recode(const InputDocument& doc, Variable which) {
  const auto recode_block = [which](auto& b) {
    if (b.target) b.target = recode(*b.target, which);
    if (b.selection) b.selection = recode(*b.selection, which);
    if (b.counts) b.counts = recode(*b.counts, which);
    if (b.assumptions) b.assumptions = recode(*b.assumptions, which);
  };
  InputDocument out = doc;
  recode_block(out);
  for (auto& s : out.strata) recode_block(s);
  return out;
}

inline json to_json(const BoundVerdict& v) {
  json rules = json::array();
  for (auto r : v.rationale.rules_fired) rules.push_back(to_string(r));
  json out = {{"direction", to_string(v.direction)},
              {"applied_result", to_string(v.applied_result)},
              {"rationale",
               {{"monotonicity_used", v.rationale.monotonicity_used},
                {"rules_fired", rules},
                {"hypotheses", v.rationale.hypotheses},
                {"unmet", v.rationale.unmet},
                {"notes", v.rationale.notes}}}};
  if (v.cross_check) {
    json cc = {{"inter_rr", v.cross_check->inter_rr}};
    if (v.cross_check->or_sel) cc["or_sel"] = *v.cross_check->or_sel;
    if (v.cross_check->or_true) cc["or_true"] = *v.cross_check->or_true;
    out["cross_check"] = cc;
  }
  return out;
}

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline json to_json(const IntervalEstimate& e) {
  return {{"point", e.point}, {"lo", e.lo}, {"hi", e.hi}, {"level", detail::optional_number(e.level)}};
}

inline json to_json(const AdjustedRange& r) {
  return {{"point_lo", r.point_lo},
          {"point_hi", r.point_hi},
          {"lo", r.lo},
          {"hi", r.hi},
          {"level", detail::optional_number(r.level)},
          {"inter_rr_lo", r.inter_rr_lo},
          {"inter_rr_hi", r.inter_rr_hi}};
}

inline json to_json(const BoundReport& r) {
  return {{"direction", to_string(r.direction)},
          {"applied_result", to_string(r.applied_result)},
          {"statement", r.statement},
          {"or_true_at_least", detail::optional_number(r.or_true_at_least)},
          {"or_true_at_most", detail::optional_number(r.or_true_at_most)},
          {"confidence_at_least", detail::optional_number(r.confidence_at_least)},
          {"confidence_at_most", detail::optional_number(r.confidence_at_most)},
          {"unmet", r.unmet}};
}

inline json to_json(const ModelHit& h) {
  return {{"index", h.index}, {"selection", cells_json(h.model.cells())}, {"inter_rr", h.inter_rr}};
}

inline json to_json(const VerificationReport& r) {
  return {{"schema_version", kSchemaVersion},
          {"command", "verify"},
          {"result_id", to_string(r.result_id)},
          {"mode", to_string(r.mode)},
          {"count", r.count},
          {"seed", r.seed},
          {"constraint", to_string(r.constraint)},
          {"tol", r.tol},
          {"models_tested", r.models_tested},
          {"models_satisfying_conditions", r.models_satisfying_conditions},
          {"violations", r.violations},
          {"first_violation", r.first_violation ? to_json(*r.first_violation) : json(nullptr)},
          {"passed", r.passed()}};
}

inline json to_json(const SimulationResult& r) {
  json counts = json::array();
  for (int e = 0; e < 2; ++e) {
    json by_d = json::array();
    for (int d = 0; d < 2; ++d) by_d.push_back(json::array({r.counts[e][d][0], r.counts[e][d][1]}));
    counts.push_back(std::move(by_d));
  }
  return {{"n", r.n},
          {"seed", r.seed},
          {"counts_by_eds", counts},
          {"selected", r.selected},
          {"empirical_selected_or", r.empirical_selected_or}};
}

}  // namespace biasbound
