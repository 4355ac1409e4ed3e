#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mbrot/doc_utility.hpp"
#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/parallel.hpp"
#include "mbrot/utf8.hpp"

namespace mbrot::eval {

struct ScoredPair {
  std::string instance_id;
  Document hypothesis;
  Document reference;
};

struct SystemOutputs {
  std::string system_id;
  std::vector<ScoredPair> documents;
};

/// system id -> score
using SystemScores = std::map<std::string, double>;
using HumanScores = SystemScores;

/// Mean document utility of a system's hypotheses against their references.
inline double system_score(const SystemOutputs& sys, const DocUtilityConfig& cfg,
                           std::size_t parallelism = 1,
                           PairScoreCache* cache = nullptr) {
  if (sys.documents.empty())
    throw Error(ErrorKind::Data, "system '" + sys.system_id + "' has no documents");
  std::vector<double> utilities(sys.documents.size());
  std::vector<std::exception_ptr> failures(sys.documents.size());
  parallel_for(sys.documents.size(), parallelism, [&](std::size_t k) {
    try {
      const auto& d = sys.documents[k];
      utilities[k] = doc_utility(d.hypothesis, d.reference, cfg, cache).value;
    } catch (...) {
      failures[k] = std::current_exception();
    }
  });
  for (std::size_t k = 0; k < failures.size(); ++k) {
    if (!failures[k]) continue;
    try {
      std::rethrow_exception(failures[k]);
    } catch (const Error& e) {
      throw Error(e.kind(), "system '" + sys.system_id + "' instance '" +
                                sys.documents[k].instance_id + "': " + e.detail());
    }
  }
  double sum = 0.0;
  for (double u : utilities) sum += u;
  return sum / static_cast<double>(utilities.size());
}

namespace detail {

inline std::pair<std::vector<double>, std::vector<double>> common_values(
    const SystemScores& metric, const HumanScores& human) {
  std::vector<double> x, y;
  for (const auto& [system, score] : metric) {
    auto it = human.find(system);
    if (it == human.end()) continue;
    x.push_back(score);
    y.push_back(it->second);
  }
  if (x.size() < 2)
    throw Error(ErrorKind::InvalidArgument,
                "correlation needs at least 2 systems scored on both sides");
  return {std::move(x), std::move(y)};
}

}  // namespace detail

/// Sample Pearson correlation over the systems present in both maps.
inline double pearson(const SystemScores& metric, const HumanScores& human) {
  auto [x, y] = detail::common_values(metric, human);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error(ErrorKind::DegenerateVariance,
                "metric or human scores are constant across systems");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Kendall's tau-b over the systems present in both maps.
inline double kendall_tau(const SystemScores& metric, const HumanScores& human) {
  auto [x, y] = detail::common_values(metric, human);
  double concordant = 0.0, discordant = 0.0, ties_x = 0.0, ties_y = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = a + 1; b < x.size(); ++b) {
      double dx = x[a] - x[b];
      double dy = y[a] - y[b];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ties_x += 1.0;
      } else if (dy == 0.0) {
        ties_y += 1.0;
      } else if ((dx > 0) == (dy > 0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  double denom = std::sqrt((concordant + discordant + ties_x) *
                           (concordant + discordant + ties_y));
  if (denom == 0.0)
    throw Error(ErrorKind::DegenerateVariance,
                "metric or human scores are constant across systems");
  return (concordant - discordant) / denom;
}

struct HypothesisLine {
  std::string system;
  std::string id;
  std::string text;
};

/// {"system": str, "id": str, "text": str} per line.
inline std::vector<HypothesisLine> read_hypotheses(std::istream& in) {
  std::vector<HypothesisLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (utf8::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("system").get<std::string>(), j.at("id").get<std::string>(),
                     j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Data,
                  "hypotheses line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// {"id": str, "text": str} per line.
inline std::map<std::string, std::string> read_references(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (utf8::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto id = j.at("id").get<std::string>();
      if (!out.emplace(id, j.at("text").get<std::string>()).second)
        throw Error(ErrorKind::Data, "duplicate reference id '" + id + "'", lineno);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Data,
                  "references line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// CSV "system,score"; a header row whose score column is not numeric is
/// skipped.
inline HumanScores read_human_scores(std::istream& in) {
  HumanScores out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto trimmed = std::string(utf8::trim(line));
    if (trimmed.empty()) continue;
    auto comma = trimmed.rfind(',');
    if (comma == std::string::npos)
      throw Error(ErrorKind::Data, "human scores line " + std::to_string(lineno) +
                                       ": expected 'system,score'");
    auto system = std::string(utf8::trim(std::string_view(trimmed).substr(0, comma)));
    auto value = std::string(utf8::trim(std::string_view(trimmed).substr(comma + 1)));
    double score = 0.0;
    std::size_t used = 0;
    try {
      score = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) {
      if (lineno == 1 && out.empty()) continue;
      throw Error(ErrorKind::Data, "human scores line " + std::to_string(lineno) +
                                       ": score '" + value + "' is not a number");
    }
    out[system] = score;
  }
  return out;
}

struct LoadedSystems {
  std::vector<SystemOutputs> systems;
  /// Hypothesis/reference pairs dropped because a side had no text.
  std::size_t skipped = 0;
};

/// Segments hypotheses and references into documents grouped by system.
/// Every hypothesis must have a reference; pairs whose either side cannot be
/// segmented are skipped and counted.
inline LoadedSystems assemble_systems(const std::vector<HypothesisLine>& hyps,
                                      const std::map<std::string, std::string>& refs,
                                      WeightScheme scheme,
                                      std::string_view language = "en") {
  LoadedSystems out;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& h : hyps) {
    auto ref = refs.find(h.id);
    if (ref == refs.end())
      throw Error(ErrorKind::Data, "no reference for instance '" + h.id + "'");
    if (!seen[h.system].insert(h.id).second)
      throw Error(ErrorKind::Data, "system '" + h.system + "' repeats instance '" +
                                       h.id + "'");
    auto [it, fresh] = index.emplace(h.system, out.systems.size());
    if (fresh) out.systems.push_back({h.system, {}});
    try {
      out.systems[it->second].documents.push_back(
          {h.id, make_document(h.id, h.text, scheme, language),
           make_document(h.id, ref->second, scheme, language)});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateDocument) throw;
      ++out.skipped;
    }
  }
  return out;
}

}  // namespace mbrot::eval
