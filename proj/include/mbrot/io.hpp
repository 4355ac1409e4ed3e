#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mbrot/doc_utility.hpp"
#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/mbr.hpp"
#include "mbrot/ot/plan.hpp"
#include "mbrot/utf8.hpp"

namespace mbrot::io {

using nlohmann::json;

/// 17 significant digits, always with a fraction or exponent so the value
/// reads back as floating point.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "null";
  if (std::isinf(x)) return x > 0 ? "1e999" : "-1e999";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

/// Compact JSON with doubles printed by format_double. Object keys keep
/// nlohmann's (sorted) order, so output is byte-stable.
inline void dump(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        dump(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) out += ',';
        dump(j[k], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      out += format_double(j.get<double>());
      break;
    case json::value_t::string:
      out += j.dump(-1, ' ', false, json::error_handler_t::replace);
      break;
    default:
      out += j.dump();
  }
}

inline std::string dump(const json& j) {
  std::string out;
  dump(j, out);
  return out;
}

inline json matrix_json(const ot::Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Reads decode input, one instance per line:
///   {"id": str, "source": str|null, "candidates": [str, ...]}
///   {"id": str, "candidates_segmented": [[str, ...], ...]}
/// Candidate ids are their positions ("0", "1", ...).
inline std::vector<CandidateSet> read_candidate_sets(std::istream& in,
                                                     WeightScheme scheme,
                                                     std::string_view language = "en") {
  std::vector<CandidateSet> out;
  std::string line;
  std::size_t lineno = 0;
  const std::string_view joiner =
      language == "ja" || language.starts_with("ja-") || language == "zh" ? "" : " ";
  while (std::getline(in, line)) {
    ++lineno;
    if (utf8::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Data, "input line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      CandidateSet set;
      set.instance_id = j.contains("id") && !j["id"].is_null()
                            ? (j["id"].is_string() ? j["id"].get<std::string>()
                                                   : j["id"].dump())
                            : std::to_string(lineno);
      if (j.contains("candidates_segmented")) {
        const auto& docs = j.at("candidates_segmented");
        for (std::size_t k = 0; k < docs.size(); ++k) {
          auto pieces = docs[k].get<std::vector<std::string>>();
          set.candidates.push_back(make_document(std::to_string(k), pieces, scheme, joiner));
        }
      } else {
        const auto& docs = j.at("candidates");
        for (std::size_t k = 0; k < docs.size(); ++k)
          set.candidates.push_back(make_document(
              std::to_string(k), docs[k].get<std::string>(), scheme, language));
      }
      set.validate();
      out.push_back(std::move(set));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Data, "input line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "input line " + std::to_string(lineno) + ": " + e.detail());
    }
  }
  return out;
}

/// Cost matrix, weights, coupling, objective and potentials of one pair.
inline json plan_json(const DocTransport& t, const DocUtilityConfig& cfg,
                      const Document& h, const Document& y) {
  json j;
  j["formulation"] = std::string(to_string(cfg.formulation));
  j["kind"] = std::string(ot::to_string(t.plan.kind));
  json hs = json::array(), ys = json::array();
  for (const auto& s : h.segments) hs.push_back(s.text());
  for (const auto& s : y.segments) ys.push_back(s.text());
  j["hypothesis_segments"] = hs;
  j["reference_segments"] = ys;
  j["cost"] = matrix_json(t.cost.values());
  j["p_h"] = t.p_h;
  j["p_y"] = t.p_y;
  j["coupling"] = matrix_json(t.plan.coupling);
  j["transport_cost"] = t.plan.transport_cost;
  j["objective"] = t.plan.objective;
  j["utility"] = utility_from_plan(t.plan, cfg);
  if (t.plan.kind == ot::PlanKind::Assignment) {
    j["mapping"] = t.plan.mapping;
  } else {
    j["duals"] = {{"row", t.plan.row_potential}, {"col", t.plan.col_potential}};
  }
  if (t.plan.kind == ot::PlanKind::Entropic) {
    j["kl"] = t.plan.kl;
    j["epsilon"] = cfg.entropic->epsilon;
    j["include_kl_in_utility"] = cfg.include_kl_in_utility;
    j["converged"] = t.plan.converged;
    j["iterations"] = t.plan.iterations;
    j["marginal_error"] = t.plan.marginal_error;
  }
  return j;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fingerprint(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mbrot::io
