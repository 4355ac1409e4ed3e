#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbrot/error.hpp"
#include "mbrot/utf8.hpp"

namespace mbrot {

/// A trimmed, non-empty piece of text. `char_len` counts Unicode scalar
/// values, not bytes.
class Segment {
 public:
  explicit Segment(std::string_view text) : text_(utf8::trim(text)) {
    if (text_.empty())
      throw Error(ErrorKind::DegenerateDocument,
                  "segment is empty after trimming whitespace");
    char_len_ = utf8::char_count(text_);
  }

  const std::string& text() const noexcept { return text_; }
  std::size_t char_len() const noexcept { return char_len_; }

  friend bool operator==(const Segment& a, const Segment& b) {
    return a.text_ == b.text_;
  }

 private:
  std::string text_;
  std::size_t char_len_ = 0;
};

enum class WeightScheme { Uniform, LengthProportional };

inline std::string_view to_string(WeightScheme scheme) {
  return scheme == WeightScheme::Uniform ? "uniform" : "length";
}

namespace detail {

inline bool is_cjk_terminal(std::string_view ch) {
  return ch == "。" || ch == "！" || ch == "？";
}

inline bool is_ascii_terminal(std::string_view ch) {
  return ch == "." || ch == "!" || ch == "?";
}

inline bool is_closer(std::string_view ch) {
  static constexpr std::array<std::string_view, 10> closers = {
      "\"", "'", ")", "]", "}", "”", "’", "」", "』", "）"};
  return std::find(closers.begin(), closers.end(), ch) != closers.end();
}

inline bool is_english(std::string_view language) {
  return language.empty() || language == "en" || language.starts_with("en-") ||
         language.starts_with("en_") || language == "und";
}

/// Tokens whose trailing period does not end a sentence. Compared
/// case-insensitively, period included.
inline bool is_abbreviation(std::string_view token) {
  static constexpr std::array<std::string_view, 30> abbreviations = {
      "mr.",   "mrs.", "ms.",  "dr.",  "prof.", "sr.",   "jr.",  "st.",
      "vs.",   "etc.", "e.g.", "i.e.", "inc.",  "ltd.",  "co.",  "corp.",
      "no.",   "vol.", "fig.", "al.",  "approx.", "dept.", "est.", "gen.",
      "gov.",  "jan.", "feb.", "aug.", "sept.", "u.s."};
  std::string lower(token);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  // Drop opening punctuation such as "(Dr." before the lookup.
  auto first = lower.find_first_not_of("\"'([{");
  if (first == std::string::npos) return false;
  std::string_view word = std::string_view(lower).substr(first);
  if (std::find(abbreviations.begin(), abbreviations.end(), word) !=
      abbreviations.end())
    return true;
  // Single-letter initials ("J.") and dotted acronyms ("U.K.").
  if (word.size() == 2 && std::isalpha(static_cast<unsigned char>(word[0])))
    return true;
  if (word.size() >= 4 && word.size() % 2 == 0) {
    bool dotted = true;
    for (std::size_t i = 0; i < word.size(); i += 2)
      dotted = dotted && std::isalpha(static_cast<unsigned char>(word[i])) &&
               word[i + 1] == '.';
    if (dotted) return true;
  }
  return false;
}

}  // namespace detail

/// Rule-based sentence splitter.
///
/// A boundary follows a run of terminal punctuation (`. ! ? 。 ！ ？`) plus any
/// closing quotes or brackets. ASCII terminals additionally require
/// whitespace or end-of-text after them; CJK terminals do not. For English a
/// single period after a known abbreviation or an initial is not a boundary.
/// Whitespace-only pieces are dropped. Text without any boundary comes back
/// as a single segment.
inline std::vector<Segment> segment(std::string_view text,
                                    std::string_view language = "en") {
  if (utf8::trim(text).empty())
    throw Error(ErrorKind::DegenerateDocument,
                "text is empty or whitespace-only");

  const auto chars = utf8::characters(text);
  const bool english = detail::is_english(language);
  std::vector<Segment> out;

  auto offset_of = [&](std::size_t ci) -> std::size_t {
    return ci == chars.size()
               ? text.size()
               : static_cast<std::size_t>(chars[ci].data() - text.data());
  };
  auto emit = [&](std::size_t begin_ci, std::size_t end_ci) {
    auto piece = text.substr(offset_of(begin_ci),
                             offset_of(end_ci) - offset_of(begin_ci));
    if (!utf8::trim(piece).empty()) out.emplace_back(piece);
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < chars.size()) {
    const bool cjk = detail::is_cjk_terminal(chars[i]);
    if (!cjk && !detail::is_ascii_terminal(chars[i])) {
      ++i;
      continue;
    }
    std::size_t run_begin = i;
    std::size_t j = i;
    bool any_cjk = false;
    while (j < chars.size() && (detail::is_cjk_terminal(chars[j]) ||
                                detail::is_ascii_terminal(chars[j]))) {
      any_cjk = any_cjk || detail::is_cjk_terminal(chars[j]);
      ++j;
    }
    while (j < chars.size() && detail::is_closer(chars[j])) ++j;

    bool boundary = any_cjk || j == chars.size() || utf8::is_space(chars[j]);
    if (boundary && !any_cjk && english && j - run_begin >= 1 &&
        chars[run_begin] == "." &&
        (run_begin + 1 == chars.size() ||
         !detail::is_ascii_terminal(chars[run_begin + 1]))) {
      std::size_t k = run_begin;
      while (k > start && !utf8::is_space(chars[k - 1])) --k;
      auto token = text.substr(offset_of(k),
                               offset_of(run_begin + 1) - offset_of(k));
      if (j < chars.size() && detail::is_abbreviation(token)) boundary = false;
    }
    if (boundary) {
      emit(start, j);
      start = j;
    }
    i = j;
  }
  if (start < chars.size()) emit(start, chars.size());
  return out;
}

/// Probability mass per segment: equal mass, or mass proportional to the
/// character count.
inline std::vector<double> make_weights(std::span<const Segment> segments,
                                        WeightScheme scheme) {
  if (segments.empty())
    throw Error(ErrorKind::DegenerateDocument, "no segments to weight");
  const std::size_t m = segments.size();
  std::vector<double> w(m);
  if (scheme == WeightScheme::Uniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(m));
  } else {
    double total = 0.0;
    for (const auto& s : segments) total += static_cast<double>(s.char_len());
    for (std::size_t i = 0; i < m; ++i)
      w[i] = static_cast<double>(segments[i].char_len()) / total;
  }
  return w;
}

/// Throws InvalidArgument unless `w` is a non-empty probability vector.
inline void validate_weights(std::span<const double> w,
                             std::string_view what = "weights") {
  if (w.empty())
    throw Error(ErrorKind::InvalidArgument, std::string(what) + " are empty");
  double sum = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0)
      throw Error(ErrorKind::InvalidArgument,
                  std::string(what) + " must be finite and non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorKind::InvalidArgument,
                std::string(what) + " must sum to 1");
}

/// An ordered list of segments with their probability mass. `text` keeps the
/// original, unsegmented form for whole-document scoring and output.
struct Document {
  std::string id;
  std::string text;
  std::vector<Segment> segments;
  std::vector<double> weights;

  std::size_t size() const noexcept { return segments.size(); }

  /// True when both documents consist of the same segment texts in the same
  /// order with the same weights.
  bool same_content(const Document& other) const {
    return segments == other.segments && weights == other.weights;
  }
};

inline Document make_document(std::string id, std::string_view text,
                              WeightScheme scheme,
                              std::string_view language = "en") {
  Document doc;
  doc.id = std::move(id);
  doc.text = std::string(text);
  doc.segments = segment(text, language);
  doc.weights = make_weights(doc.segments, scheme);
  return doc;
}

/// Builds a document from segments supplied by an external sentencizer.
/// Whitespace-only pieces are dropped; nothing else is re-split.
inline Document make_document(std::string id,
                              std::span<const std::string> pieces,
                              WeightScheme scheme,
                              std::string_view joiner = " ") {
  Document doc;
  doc.id = std::move(id);
  for (const auto& piece : pieces) {
    if (utf8::trim(piece).empty()) continue;
    doc.segments.emplace_back(piece);
  }
  if (doc.segments.empty())
    throw Error(ErrorKind::DegenerateDocument,
                "pre-segmented document has no non-empty segment");
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    if (i) doc.text += joiner;
    doc.text += doc.segments[i].text();
  }
  doc.weights = make_weights(doc.segments, scheme);
  return doc;
}

}  // namespace mbrot
