#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/utf8.hpp"

namespace mbrot {

enum class UtilityKind {
  TokenF1,
  SentenceBleu,
  ChrF,
  EmbeddingCosine,
  ExactMatch,
  ExternalAdapter,
};

struct TextPair {
  std::string hyp;
  std::string ref;
};

/// A sentence-level utility u_s(hyp, ref) with range [0, 1].
///
/// Implementations are immutable after construction and safe to call from
/// several threads at once.
class SentenceUtility {
 public:
  virtual ~SentenceUtility() = default;

  virtual UtilityKind kind() const = 0;

  /// Stable identifier including every parameter that changes scores. Used
  /// for cache keys and run fingerprints.
  virtual std::string id() const = 0;

  /// Whether u_s(a, b) == u_s(b, a) holds bit-for-bit.
  virtual bool symmetric() const = 0;

  virtual double score(std::string_view hyp, std::string_view ref) const = 0;

  /// Scores every pair in order. Failures are re-thrown tagged with the
  /// index of the failing pair.
  virtual std::vector<double> score_batch(std::span<const TextPair> pairs) const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      try {
        out.push_back(score(pairs[i].hyp, pairs[i].ref));
      } catch (const Error& e) {
        throw e.at(i);
      }
    }
    return out;
  }
};

using SentenceUtilityPtr = std::shared_ptr<const SentenceUtility>;

inline double score_pair(const SentenceUtility& u, const Segment& a,
                         const Segment& b) {
  return u.score(a.text(), b.text());
}

inline std::vector<double> batch_score(
    const SentenceUtility& u,
    std::span<const std::pair<Segment, Segment>> pairs) {
  if (pairs.empty())
    throw Error(ErrorKind::InvalidArgument, "batch_score needs at least one pair");
  std::vector<TextPair> texts;
  texts.reserve(pairs.size());
  for (const auto& [a, b] : pairs) texts.push_back({a.text(), b.text()});
  return u.score_batch(texts);
}

/// Maps a lower-is-better score in [lo, hi] onto a utility in [0, 1].
/// `raw` is clamped into the interval first.
inline double rescale_lower_better(double raw, double lo, double hi) {
  if (!(lo < hi))
    throw Error(ErrorKind::InvalidRange, "rescale needs lo < hi");
  double clamped = std::clamp(raw, lo, hi);
  return (hi - clamped) / (hi - lo);
}

namespace detail {

inline bool uses_character_tokens(std::string_view language) {
  return language == "ja" || language.starts_with("ja-") ||
         language.starts_with("ja_") || language == "zh" ||
         language.starts_with("zh-");
}

inline std::vector<std::string_view> tokenize(std::string_view text,
                                              bool characters) {
  if (!characters) return utf8::split_whitespace(text);
  std::vector<std::string_view> out;
  for (auto ch : utf8::characters(text))
    if (!utf8::is_space(ch)) out.push_back(ch);
  return out;
}

using NgramCounts = std::unordered_map<std::string, int>;

inline NgramCounts count_ngrams(std::span<const std::string_view> tokens,
                                std::size_t order) {
  NgramCounts counts;
  if (tokens.size() < order) return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < order; ++k) {
      if (k) key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

inline int clipped_matches(const NgramCounts& hyp, const NgramCounts& ref) {
  int matches = 0;
  for (const auto& [gram, count] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(count, it->second);
  }
  return matches;
}

}  // namespace detail

/// F1 over the token multisets of the two segments.
class TokenF1 final : public SentenceUtility {
 public:
  explicit TokenF1(std::string language = "en") : language_(std::move(language)) {}

  UtilityKind kind() const override { return UtilityKind::TokenF1; }
  std::string id() const override {
    return "token-f1:" + std::string(tokenizer_name());
  }
  bool symmetric() const override { return true; }

  double score(std::string_view hyp, std::string_view ref) const override {
    bool chars = detail::uses_character_tokens(language_);
    auto a = detail::tokenize(hyp, chars);
    auto b = detail::tokenize(ref, chars);
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    auto ca = detail::count_ngrams(a, 1);
    auto cb = detail::count_ngrams(b, 1);
    // The clipped overlap is the same from either side, and
    // 2|A∩B| / (|A| + |B|) equals the harmonic mean of precision and recall.
    int overlap = detail::clipped_matches(ca, cb);
    return 2.0 * overlap / static_cast<double>(a.size() + b.size());
  }

 private:
  std::string_view tokenizer_name() const {
    return detail::uses_character_tokens(language_) ? "char" : "ws";
  }
  std::string language_;
};

/// Smoothed sentence BLEU: clipped n-gram precisions up to `max_order`,
/// add-one smoothing for orders above 1, brevity penalty exp(1 - r/c).
class SentenceBleu final : public SentenceUtility {
 public:
  explicit SentenceBleu(std::string language = "en", int max_order = 4)
      : language_(std::move(language)), max_order_(max_order) {
    if (max_order_ < 1)
      throw Error(ErrorKind::InvalidArgument, "BLEU order must be >= 1");
  }

  UtilityKind kind() const override { return UtilityKind::SentenceBleu; }
  std::string id() const override {
    return "bleu:n" + std::to_string(max_order_) + ":" +
           (detail::uses_character_tokens(language_) ? "char" : "ws");
  }
  bool symmetric() const override { return false; }

  double score(std::string_view hyp, std::string_view ref) const override {
    bool chars = detail::uses_character_tokens(language_);
    auto h = detail::tokenize(hyp, chars);
    auto r = detail::tokenize(ref, chars);
    if (h.empty() || r.empty()) return h.empty() && r.empty() ? 1.0 : 0.0;

    double log_precision = 0.0;
    for (int n = 1; n <= max_order_; ++n) {
      auto hc = detail::count_ngrams(h, static_cast<std::size_t>(n));
      auto rc = detail::count_ngrams(r, static_cast<std::size_t>(n));
      double total = h.size() >= static_cast<std::size_t>(n)
                         ? static_cast<double>(h.size() - n + 1)
                         : 0.0;
      double matches = detail::clipped_matches(hc, rc);
      double p;
      if (n == 1) {
        if (matches == 0.0) return 0.0;
        p = matches / total;
      } else {
        p = (matches + 1.0) / (total + 1.0);
      }
      log_precision += std::log(p);
    }
    double c = static_cast<double>(h.size());
    double ref_len = static_cast<double>(r.size());
    double log_bp = c < ref_len ? 1.0 - ref_len / c : 0.0;
    double bleu = std::exp(log_bp + log_precision / max_order_);
    return std::clamp(bleu, 0.0, 1.0);
  }

 private:
  std::string language_;
  int max_order_;
};

/// Character n-gram F-score (chrF) with orders 1..max_order, whitespace
/// removed, precision and recall averaged over orders before combining.
class ChrF final : public SentenceUtility {
 public:
  explicit ChrF(int max_order = 6, double beta = 2.0)
      : max_order_(max_order), beta_(beta) {
    if (max_order_ < 1 || !(beta_ > 0.0))
      throw Error(ErrorKind::InvalidArgument, "chrF needs order >= 1, beta > 0");
  }

  UtilityKind kind() const override { return UtilityKind::ChrF; }
  std::string id() const override {
    return "chrf:n" + std::to_string(max_order_) + ":b" + std::to_string(beta_);
  }
  bool symmetric() const override { return false; }

  double score(std::string_view hyp, std::string_view ref) const override {
    auto h = detail::tokenize(hyp, true);
    auto r = detail::tokenize(ref, true);
    if (h.empty() || r.empty()) return h.empty() && r.empty() ? 1.0 : 0.0;
    double precision = 0.0;
    double recall = 0.0;
    int orders = 0;
    for (int n = 1; n <= max_order_; ++n) {
      auto hc = detail::count_ngrams(h, static_cast<std::size_t>(n));
      auto rc = detail::count_ngrams(r, static_cast<std::size_t>(n));
      if (hc.empty() && rc.empty()) continue;
      double hyp_total = h.size() >= static_cast<std::size_t>(n)
                             ? static_cast<double>(h.size() - n + 1)
                             : 0.0;
      double ref_total = r.size() >= static_cast<std::size_t>(n)
                             ? static_cast<double>(r.size() - n + 1)
                             : 0.0;
      double matches = detail::clipped_matches(hc, rc);
      precision += hyp_total > 0 ? matches / hyp_total : 0.0;
      recall += ref_total > 0 ? matches / ref_total : 0.0;
      ++orders;
    }
    precision /= orders;
    recall /= orders;
    if (precision == 0.0 && recall == 0.0) return 0.0;
    double b2 = beta_ * beta_;
    double f = (1.0 + b2) * precision * recall / (b2 * precision + recall);
    return std::clamp(f, 0.0, 1.0);
  }

 private:
  int max_order_;
  double beta_;
};

/// 1 when the strings are identical, 0 otherwise.
class ExactMatch final : public SentenceUtility {
 public:
  UtilityKind kind() const override { return UtilityKind::ExactMatch; }
  std::string id() const override { return "exact"; }
  bool symmetric() const override { return true; }
  double score(std::string_view hyp, std::string_view ref) const override {
    return hyp == ref ? 1.0 : 0.0;
  }
};

/// Unit-norm sentence vectors keyed by exact segment text.
class EmbeddingTable {
 public:
  /// Adds (or replaces) a vector after L2-normalizing it.
  void add(std::string text, std::vector<double> vector) {
    if (vector.empty())
      throw Error(ErrorKind::Data, "embedding vector is empty");
    if (dimension_ != 0 && vector.size() != dimension_)
      throw Error(ErrorKind::Data,
                  "embedding dimension " + std::to_string(vector.size()) +
                      " differs from table dimension " +
                      std::to_string(dimension_));
    double norm = 0.0;
    for (double x : vector) {
      if (!std::isfinite(x))
        throw Error(ErrorKind::Data, "embedding has a non-finite component");
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0)
      throw Error(ErrorKind::Data, "embedding for '" + text + "' has zero norm");
    for (double& x : vector) x /= norm;
    dimension_ = vector.size();
    vectors_[std::move(text)] = std::move(vector);
  }

  const std::vector<double>* find(std::string_view text) const {
    auto it = vectors_.find(std::string(text));
    return it == vectors_.end() ? nullptr : &it->second;
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return vectors_.size(); }

  /// Reads JSONL lines of the form {"text": str, "vector": [float, ...]}.
  static EmbeddingTable load(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (utf8::trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        table.add(j.at("text").get<std::string>(),
                  j.at("vector").get<std::vector<double>>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Data,
                    "embedding line " + std::to_string(lineno) + ": " + e.what());
      } catch (const Error& e) {
        throw Error(ErrorKind::Data,
                    "embedding line " + std::to_string(lineno) + ": " + e.detail());
      }
    }
    return table;
  }

  static EmbeddingTable load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open embedding file " + path);
    return load(in);
  }

 private:
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::size_t dimension_ = 0;
};

/// max(0, cosine) between precomputed unit vectors.
class EmbeddingCosine final : public SentenceUtility {
 public:
  explicit EmbeddingCosine(std::shared_ptr<const EmbeddingTable> table,
                           std::string name = "table")
      : table_(std::move(table)), name_(std::move(name)) {}

  UtilityKind kind() const override { return UtilityKind::EmbeddingCosine; }
  std::string id() const override { return "embedding:" + name_; }
  bool symmetric() const override { return true; }

  double score(std::string_view hyp, std::string_view ref) const override {
    const auto* a = table_->find(hyp);
    if (!a)
      throw Error(ErrorKind::MissingEmbedding,
                  "no embedding for '" + std::string(hyp) + "'");
    const auto* b = table_->find(ref);
    if (!b)
      throw Error(ErrorKind::MissingEmbedding,
                  "no embedding for '" + std::string(ref) + "'");
    if (hyp == ref) return 1.0;
    double dot = 0.0;
    for (std::size_t k = 0; k < a->size(); ++k) dot += (*a)[k] * (*b)[k];
    return std::clamp(dot, 0.0, 1.0);
  }

 private:
  std::shared_ptr<const EmbeddingTable> table_;
  std::string name_;
};

}  // namespace mbrot
