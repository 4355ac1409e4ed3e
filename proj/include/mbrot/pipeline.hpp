#pragma once

// Batch decoding and metric evaluation over whole files. The CLI is a thin
// layer over these functions.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <exception>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbrot/doc_utility.hpp"
#include "mbrot/error.hpp"
#include "mbrot/eval.hpp"
#include "mbrot/io.hpp"
#include "mbrot/mbr.hpp"
#include "mbrot/parallel.hpp"
#include "mbrot/version.hpp"

namespace mbrot {

struct DecodeOptions {
  DocUtilityConfig utility;
  std::string language = "en";
  std::size_t parallelism = 1;
  /// Whole-document MBR with the sentence utility; no segmentation or OT.
  bool baseline = false;
  bool use_symmetry = true;
  std::uint64_t seed = 0;

  std::string describe() const {
    return utility.describe() + ";language=" + language +
           ";baseline=" + (baseline ? "1" : "0") +
           ";symmetry=" + (use_symmetry ? "1" : "0");
  }
  std::string fingerprint() const { return io::fingerprint(describe()); }
};

struct InstanceOutcome {
  std::string id;
  std::size_t candidates = 0;
  SelectionResult selection;
  std::string selected_text;
};

struct DecodeReport {
  std::vector<InstanceOutcome> instances;
  std::string config_fingerprint;
  double seconds = 0.0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

/// Selects one candidate per instance. Instances are spread over the worker
/// pool; when there are fewer instances than workers the spare workers go to
/// pairs within each instance. Results do not depend on the schedule.
inline DecodeReport run_decode(const std::vector<CandidateSet>& sets,
                               const DecodeOptions& options) {
  options.utility.validate();
  auto start = std::chrono::steady_clock::now();
  DecodeReport report;
  report.config_fingerprint = options.fingerprint();
  report.instances.resize(sets.size());

  PairScoreCache cache;
  const std::size_t workers = std::max<std::size_t>(1, options.parallelism);
  const std::size_t outer = std::min(workers, std::max<std::size_t>(sets.size(), 1));
  const std::size_t inner = std::max<std::size_t>(1, workers / outer);
  std::vector<std::exception_ptr> failures(sets.size());

  parallel_for(sets.size(), outer, [&](std::size_t k) {
    try {
      const auto& set = sets[k];
      auto& out = report.instances[k];
      out.id = set.instance_id;
      out.candidates = set.size();
      if (options.baseline) {
        out.selection =
            select_with_baseline_doc_utility(set, *options.utility.sent_utility);
      } else {
        MatrixOptions mo;
        mo.parallelism = inner;
        mo.use_symmetry = options.use_symmetry;
        mo.cache = &cache;
        out.selection = select(set, options.utility, mo);
      }
      out.selected_text = set.candidates[out.selection.selected_index].text;
    } catch (...) {
      failures[k] = std::current_exception();
    }
  });
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  report.cache_hits = cache.hits();
  report.cache_misses = cache.misses();
  report.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start).count();
  return report;
}

inline std::string selection_line(const InstanceOutcome& o,
                                  const std::string& fingerprint) {
  nlohmann::json j;
  j["id"] = o.id;
  j["selected_index"] = o.selection.selected_index;
  j["selected_text"] = o.selected_text;
  j["expected_utilities"] = o.selection.expected_utilities;
  j["config_fingerprint"] = fingerprint;
  return io::dump(j);
}

inline void write_selections(const DecodeReport& report, std::ostream& out) {
  for (const auto& o : report.instances)
    out << selection_line(o, report.config_fingerprint) << '\n';
}

inline nlohmann::json matrix_dump(const DecodeReport& report) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& o : report.instances)
    arr.push_back({{"id", o.id}, {"matrix", io::matrix_json(o.selection.matrix.values)}});
  return {{"instances", arr}};
}

/// Run metadata, including per-instance pair counts so the
/// N(N-1)/2 evaluation count of symmetric utilities can be checked.
inline nlohmann::json decode_manifest(const DecodeReport& report,
                                      const DecodeOptions& options) {
  const auto& cfg = options.utility;
  nlohmann::json m;
  m["tool"] = "mbrot";
  m["version"] = std::string(kVersion);
  m["command"] = "decode";
  m["config"] = options.describe();
  m["config_fingerprint"] = report.config_fingerprint;
  m["formulation"] = options.baseline ? "baseline" : std::string(to_string(cfg.formulation));
  m["weights"] = std::string(to_string(cfg.weight_scheme));
  m["sentence_utility"] = cfg.sent_utility->id();
  m["language"] = options.language;
  m["symmetric_utility"] = !options.baseline && cfg.symmetric();
  m["symmetry_shortcut"] = options.use_symmetry;
  m["self_pair_in_expected_utility"] = true;
  m["tie_break"] = "lowest_index";
  if (cfg.entropic) {
    m["epsilon"] = cfg.entropic->epsilon;
    m["sinkhorn_max_iterations"] = cfg.entropic->max_iterations;
    m["sinkhorn_tolerance"] = cfg.entropic->tolerance;
    m["include_kl_in_utility"] = cfg.include_kl_in_utility;
    m["ewd_utility_clamped"] = false;
  }
  m["parallelism"] = options.parallelism;
  m["seed"] = options.seed;

  std::size_t total_pairs = 0, total_solver = 0, total_nonconverged = 0;
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& o : report.instances) {
    const auto& u = o.selection.matrix;
    nlohmann::json nc = nlohmann::json::array();
    for (const auto& d : u.diagnostics) nc.push_back({d.row, d.col});
    instances.push_back({{"id", o.id},
                         {"candidates", o.candidates},
                         {"pair_evaluations", u.pair_evaluations},
                         {"solver_calls", u.solver_calls},
                         {"mirrored", u.mirrored},
                         {"nonconverged_pairs", nc}});
    total_pairs += u.pair_evaluations;
    total_solver += u.solver_calls;
    total_nonconverged += u.diagnostics.size();
  }
  m["instances"] = instances;
  m["totals"] = {{"instances", report.instances.size()},
                 {"pair_evaluations", total_pairs},
                 {"solver_calls", total_solver},
                 {"nonconverged_pairs", total_nonconverged},
                 {"cache_hits", report.cache_hits},
                 {"cache_misses", report.cache_misses}};
  m["timing_seconds"] = report.seconds;
  return m;
}

struct EvalReport {
  eval::SystemScores metric_scores;
  std::size_t skipped = 0;
  std::size_t systems_correlated = 0;
  double pearson = 0.0;
  double kendall_tau = 0.0;
};

inline EvalReport run_eval(const eval::LoadedSystems& loaded,
                           const eval::HumanScores& human,
                           const DocUtilityConfig& cfg, std::size_t parallelism) {
  cfg.validate();
  EvalReport report;
  report.skipped = loaded.skipped;
  PairScoreCache cache;
  for (const auto& sys : loaded.systems)
    report.metric_scores[sys.system_id] =
        eval::system_score(sys, cfg, parallelism, &cache);
  for (const auto& [system, score] : report.metric_scores)
    if (human.count(system)) ++report.systems_correlated;
  report.pearson = eval::pearson(report.metric_scores, human);
  report.kendall_tau = eval::kendall_tau(report.metric_scores, human);
  return report;
}

inline void write_system_csv(const EvalReport& report, std::ostream& out) {
  out << "system,metric_score\n";
  for (const auto& [system, score] : report.metric_scores)
    out << system << ',' << io::format_double(score) << '\n';
}

inline nlohmann::json eval_summary(const EvalReport& report,
                                   const DocUtilityConfig& cfg) {
  nlohmann::json s;
  s["tool"] = "mbrot";
  s["version"] = std::string(kVersion);
  s["command"] = "eval-metric";
  s["config"] = cfg.describe();
  s["config_fingerprint"] = io::fingerprint(cfg.describe());
  s["correlation"] = {{"statistic", "pearson"},
                      {"level", "system"},
                      {"value", report.pearson},
                      {"systems", report.systems_correlated}};
  s["kendall_tau_b"] = report.kendall_tau;
  s["system_score"] = "mean document utility over instances";
  s["skipped_instances"] = report.skipped;
  nlohmann::json scores;
  for (const auto& [system, score] : report.metric_scores) scores[system] = score;
  s["metric_scores"] = scores;
  return s;
}

}  // namespace mbrot
