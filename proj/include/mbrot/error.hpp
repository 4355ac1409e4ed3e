#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mbrot {

enum class ErrorKind {
  DegenerateDocument,
  MissingEmbedding,
  AdapterUnavailable,
  AdapterRangeViolation,
  InvalidRange,
  SolverNonconvergence,
  DegenerateVariance,
  InvalidArgument,
  Config,
  Data,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateDocument: return "DegenerateDocument";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::AdapterUnavailable: return "AdapterUnavailable";
    case ErrorKind::AdapterRangeViolation: return "AdapterRangeViolation";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::SolverNonconvergence: return "SolverNonconvergence";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Data: return "Data";
  }
  return "Unknown";
}

/// Every failure raised by the library. `index` carries the position of the
/// offending item (pair, instance, line) when the failure came from a batch.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(compose(kind, message, index)),
        kind_(kind),
        detail_(message),
        index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

  /// Same error, re-tagged with the index of the batch item that failed.
  Error at(std::size_t index) const { return Error(kind_, detail_, index); }

 private:
  static std::string compose(ErrorKind kind, const std::string& message,
                             std::optional<std::size_t> index) {
    std::string out(to_string(kind));
    if (index) out += " [" + std::to_string(*index) + "]";
    out += ": ";
    out += message;
    return out;
  }

  ErrorKind kind_;
  std::string detail_;
  std::optional<std::size_t> index_;
};

}  // namespace mbrot
