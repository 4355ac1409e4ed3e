#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/ot/assignment.hpp"
#include "mbrot/ot/plan.hpp"
#include "mbrot/ot/sinkhorn.hpp"
#include "mbrot/ot/transport_simplex.hpp"
#include "mbrot/sentence_utility.hpp"

namespace mbrot {

enum class Formulation { LA, WD, EWD };

inline std::string_view to_string(Formulation f) {
  switch (f) {
    case Formulation::LA: return "la";
    case Formulation::WD: return "wd";
    case Formulation::EWD: return "ewd";
  }
  return "unknown";
}

/// How a document pair is scored: u(h, y) = 1 - OT over segment costs
/// 1 - u_s, with segment mass from `weight_scheme`.
struct DocUtilityConfig {
  Formulation formulation = Formulation::WD;
  WeightScheme weight_scheme = WeightScheme::Uniform;
  SentenceUtilityPtr sent_utility;
  /// Present iff formulation == EWD.
  std::optional<ot::EntropicParams> entropic;
  /// EWD only: subtract epsilon * KL as well as the transport cost.
  bool include_kl_in_utility = true;

  void validate() const {
    if (!sent_utility)
      throw Error(ErrorKind::Config, "no sentence utility configured");
    if (entropic.has_value() != (formulation == Formulation::EWD))
      throw Error(ErrorKind::Config,
                  "entropic parameters must be given exactly for EWD");
    if (entropic) entropic->validate();
  }

  /// u(h, y) == u(y, h) is guaranteed: an OT distance over a symmetric
  /// segment utility. LA is not symmetric in general.
  bool symmetric() const {
    return formulation != Formulation::LA && sent_utility &&
           sent_utility->symmetric();
  }

  /// Canonical description of every setting that affects utilities.
  std::string describe() const {
    std::string out = "formulation=" + std::string(to_string(formulation)) +
                      ";weights=" + std::string(to_string(weight_scheme)) +
                      ";utility=" + (sent_utility ? sent_utility->id() : "none");
    if (entropic) {
      out += ";epsilon=" + std::to_string(entropic->epsilon) +
             ";max_iterations=" + std::to_string(entropic->max_iterations) +
             ";tolerance=" + std::to_string(entropic->tolerance) +
             ";include_kl=" + (include_kl_in_utility ? "1" : "0");
    }
    return out;
  }
};

/// Thread-safe memo of segment-pair utilities, keyed by scorer id and the two
/// texts. Pairs of a symmetric scorer share one entry regardless of order.
/// Concurrent inserts of the same key are harmless: the value is identical.
class PairScoreCache {
 public:
  std::optional<double> find(const SentenceUtility& u, std::string_view a,
                             std::string_view b) const {
    auto k = key(u, a, b);
    std::shared_lock lock(mutex_);
    auto it = scores_.find(k);
    if (it == scores_.end()) {
      misses_.fetch_add(1, std::memory_order_relaxed);
      return std::nullopt;
    }
    hits_.fetch_add(1, std::memory_order_relaxed);
    return it->second;
  }

  void insert(const SentenceUtility& u, std::string_view a, std::string_view b,
              double score) {
    auto k = key(u, a, b);
    std::unique_lock lock(mutex_);
    scores_.emplace(std::move(k), score);
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return scores_.size();
  }
  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  static std::string key(const SentenceUtility& u, std::string_view a,
                         std::string_view b) {
    if (u.symmetric() && b < a) std::swap(a, b);
    std::string k = u.id();
    k += '\0';
    k += a;
    k += '\0';
    k += b;
    return k;
  }

  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, double> scores_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

/// C(i, j) = 1 - u_s(h_i, y_j), clamped into [0, 1]. Pairs missing from the
/// cache are scored in one batch.
inline ot::CostMatrix build_cost_matrix(const Document& h, const Document& y,
                                        const SentenceUtility& u,
                                        PairScoreCache* cache = nullptr) {
  const std::size_t m = h.size();
  const std::size_t n = y.size();
  if (m == 0 || n == 0)
    throw Error(ErrorKind::DegenerateDocument, "document without segments");

  ot::Matrix utility(m, n, -1.0);
  std::vector<TextPair> todo;
  std::unordered_map<std::string, std::size_t> todo_index;
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  std::vector<std::size_t> cell_todo;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& a = h.segments[i].text();
      const auto& b = y.segments[j].text();
      if (cache) {
        if (auto hit = cache->find(u, a, b)) {
          utility(i, j) = *hit;
          continue;
        }
      }
      std::string k = a;
      k += '\0';
      k += b;
      auto [it, fresh] = todo_index.emplace(std::move(k), todo.size());
      if (fresh) todo.push_back({a, b});
      cells.emplace_back(i, j);
      cell_todo.push_back(it->second);
    }
  }
  if (!todo.empty()) {
    auto scores = u.score_batch(todo);
    for (std::size_t t = 0; t < todo.size(); ++t) {
      if (!(scores[t] >= 0.0 && scores[t] <= 1.0))
        throw Error(ErrorKind::AdapterRangeViolation,
                    "sentence utility outside [0, 1] for '" + todo[t].hyp +
                        "' vs '" + todo[t].ref + "'");
      if (cache) cache->insert(u, todo[t].hyp, todo[t].ref, scores[t]);
    }
    for (std::size_t c = 0; c < cells.size(); ++c)
      utility(cells[c].first, cells[c].second) = scores[cell_todo[c]];
  }

  ot::Matrix cost(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost(i, j) = std::clamp(1.0 - utility(i, j), 0.0, 1.0);
  return ot::CostMatrix(std::move(cost));
}

/// Result of scoring one document pair.
struct DocUtility {
  double value = 1.0;
  /// False only for an EWD pair whose Sinkhorn run hit its iteration cap.
  bool converged = true;
  /// The identity shortcut applied; no solver ran.
  bool self_pair = false;
};

/// Cost matrix and transport plan for a document pair under `cfg`.
struct DocTransport {
  ot::CostMatrix cost;
  std::vector<double> p_h;
  std::vector<double> p_y;
  ot::TransportPlan plan;
};

inline ot::TransportPlan solve(const DocUtilityConfig& cfg,
                               const ot::CostMatrix& cost,
                               std::span<const double> p_h,
                               std::span<const double> p_y) {
  switch (cfg.formulation) {
    case Formulation::LA: return ot::solve_la(cost, p_h, p_y);
    case Formulation::WD: return ot::solve_wd(cost, p_h, p_y);
    case Formulation::EWD: return ot::solve_ewd(cost, p_h, p_y, *cfg.entropic);
  }
  throw Error(ErrorKind::Config, "unknown formulation");
}

inline DocTransport doc_transport(const Document& h, const Document& y,
                                  const DocUtilityConfig& cfg,
                                  PairScoreCache* cache = nullptr) {
  cfg.validate();
  auto cost = build_cost_matrix(h, y, *cfg.sent_utility, cache);
  auto p_h = make_weights(h.segments, cfg.weight_scheme);
  auto p_y = make_weights(y.segments, cfg.weight_scheme);
  auto plan = solve(cfg, cost, p_h, p_y);
  return {std::move(cost), std::move(p_h), std::move(p_y), std::move(plan)};
}

/// Utility 1 - OT implied by a solved plan under `cfg`.
inline double utility_from_plan(const ot::TransportPlan& plan,
                                const DocUtilityConfig& cfg) {
  if (cfg.formulation == Formulation::EWD && !cfg.include_kl_in_utility)
    return 1.0 - plan.transport_cost;
  return 1.0 - plan.objective;
}

/// u(h, y) = 1 - OT[p_h || p_y].
///
/// A document paired with itself (same object or same segment texts) scores
/// exactly 1 without running a solver. LA and WD results lie in [0, 1]; EWD
/// with the KL term can go below 0 and is left unclamped.
inline DocUtility doc_utility(const Document& h, const Document& y,
                              const DocUtilityConfig& cfg,
                              PairScoreCache* cache = nullptr) {
  cfg.validate();
  if (&h == &y || h.segments == y.segments) return {1.0, true, true};
  auto t = doc_transport(h, y, cfg, cache);
  return {utility_from_plan(t.plan, cfg), t.plan.converged, false};
}

}  // namespace mbrot
