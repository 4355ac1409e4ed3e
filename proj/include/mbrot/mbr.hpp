#pragma once

#include <cstddef>
#include <exception>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mbrot/doc_utility.hpp"
#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/ot/plan.hpp"
#include "mbrot/parallel.hpp"
#include "mbrot/sentence_utility.hpp"

namespace mbrot {

/// Candidates for one input; they double as the pseudo-references.
struct CandidateSet {
  std::string instance_id;
  std::vector<Document> candidates;

  std::size_t size() const noexcept { return candidates.size(); }

  void validate() const {
    if (candidates.empty())
      throw Error(ErrorKind::DegenerateDocument,
                  "instance '" + instance_id + "' has no candidates");
    std::set<std::string> ids;
    for (const auto& c : candidates)
      if (!ids.insert(c.id).second)
        throw Error(ErrorKind::Data, "instance '" + instance_id +
                                         "' repeats candidate id '" + c.id + "'");
  }
};

/// A document pair whose Sinkhorn run stopped at its iteration cap.
struct PairDiagnostic {
  std::size_t row;
  std::size_t col;
  bool converged;
};

/// U(i, j) = u(candidate_i, candidate_j), unit diagonal.
struct UtilityMatrix {
  ot::Matrix values;
  /// Entries below the diagonal were mirrored, not computed.
  bool mirrored = false;
  /// doc_utility calls made (off-diagonal pairs actually evaluated).
  std::size_t pair_evaluations = 0;
  /// Pairs that reached an OT solver (evaluations minus identical pairs).
  std::size_t solver_calls = 0;
  std::vector<PairDiagnostic> diagnostics;

  std::size_t size() const noexcept { return values.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
};

struct MatrixOptions {
  std::size_t parallelism = 1;
  /// Compute only i < j and mirror when the configured utility is symmetric.
  bool use_symmetry = true;
  /// Shared segment-pair memo; a private one is used when null.
  PairScoreCache* cache = nullptr;
};

inline UtilityMatrix compute_utility_matrix(const CandidateSet& cands,
                                            const DocUtilityConfig& cfg,
                                            const MatrixOptions& options = {}) {
  cands.validate();
  cfg.validate();
  const std::size_t n = cands.size();
  const bool mirror = options.use_symmetry && cfg.symmetric();

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = mirror ? i + 1 : 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);

  PairScoreCache local_cache;
  PairScoreCache* cache = options.cache ? options.cache : &local_cache;

  std::vector<DocUtility> results(pairs.size());
  std::vector<std::exception_ptr> failures(pairs.size());
  parallel_for(pairs.size(), options.parallelism, [&](std::size_t k) {
    try {
      const auto [i, j] = pairs[k];
      results[k] = doc_utility(cands.candidates[i], cands.candidates[j], cfg, cache);
    } catch (...) {
      failures[k] = std::current_exception();
    }
  });
  // Report the first failing pair in enumeration order, whatever thread hit
  // it first.
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!failures[k]) continue;
    const auto [i, j] = pairs[k];
    std::string where = "instance '" + cands.instance_id + "' pair (" +
                        std::to_string(i) + ", " + std::to_string(j) + "): ";
    try {
      std::rethrow_exception(failures[k]);
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.detail(), e.index());
    }
  }

  UtilityMatrix u;
  u.values = ot::Matrix(n, n);
  u.mirrored = mirror;
  u.pair_evaluations = pairs.size();
  for (std::size_t i = 0; i < n; ++i) u.values(i, i) = 1.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    u.values(i, j) = results[k].value;
    if (mirror) u.values(j, i) = results[k].value;
    if (!results[k].self_pair) ++u.solver_calls;
    if (!results[k].converged) u.diagnostics.push_back({i, j, false});
  }
  return u;
}

struct SelectionResult {
  std::size_t selected_index = 0;
  /// Row means of the utility matrix, self-pair included.
  std::vector<double> expected_utilities;
  std::vector<PairDiagnostic> diagnostics;
  UtilityMatrix matrix;
};

/// Row means of `u` and their argmax; the lowest index wins ties.
inline SelectionResult select(UtilityMatrix u) {
  const std::size_t n = u.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "empty utility matrix");
  SelectionResult r;
  r.expected_utilities.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += u(i, j);
    r.expected_utilities[i] = sum / static_cast<double>(n);
    if (r.expected_utilities[i] > r.expected_utilities[r.selected_index])
      r.selected_index = i;
  }
  r.diagnostics = u.diagnostics;
  r.matrix = std::move(u);
  return r;
}

/// MBR selection: argmax_h (1/N) sum_y u(h, y) over the candidate set.
inline SelectionResult select(const CandidateSet& cands,
                              const DocUtilityConfig& cfg,
                              const MatrixOptions& options = {}) {
  return select(compute_utility_matrix(cands, cfg, options));
}

/// Standard MBR that scores whole documents with the sentence utility
/// directly, without segmentation or transport.
inline SelectionResult select_with_baseline_doc_utility(const CandidateSet& cands,
                                                        const SentenceUtility& u) {
  cands.validate();
  const std::size_t n = cands.size();
  const bool mirror = u.symmetric();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<TextPair> texts;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = mirror ? i + 1 : 0; j < n; ++j)
      if (i != j) {
        pairs.emplace_back(i, j);
        texts.push_back({cands.candidates[i].text, cands.candidates[j].text});
      }

  UtilityMatrix m;
  m.values = ot::Matrix(n, n);
  m.mirrored = mirror;
  m.pair_evaluations = pairs.size();
  for (std::size_t i = 0; i < n; ++i) m.values(i, i) = 1.0;
  if (!texts.empty()) {
    std::vector<double> scores;
    try {
      scores = u.score_batch(texts);
    } catch (const Error& e) {
      std::string where = "instance '" + cands.instance_id + "'";
      if (e.index())
        where += " pair (" + std::to_string(pairs[*e.index()].first) + ", " +
                 std::to_string(pairs[*e.index()].second) + ")";
      throw Error(e.kind(), where + ": " + e.detail(), e.index());
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      m.values(pairs[k].first, pairs[k].second) = scores[k];
      if (mirror) m.values(pairs[k].second, pairs[k].first) = scores[k];
    }
  }
  return select(std::move(m));
}

}  // namespace mbrot
