#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memvad {

/// Failure classes surfaced by the library. The CLI maps each one to a
/// distinct exit code, so new values must be appended, never reordered.
enum class ErrorCategory {
  kConfig,
  kIo,
  kParse,
  kValidation,
  kFormat,
  kCorruption,
  kConsistency,
  kVersion,
  kDegenerate,
  kQuery,
  kStream,
  kUndefinedMetric,
};

std::string_view to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Parse failure with the 1-based line/column of the offending byte.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : Error(ErrorCategory::kParse, message), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A single malformed entry inside an otherwise well-formed document.
class RecordError : public Error {
 public:
  RecordError(const std::string& message, std::string collection, std::size_t index)
      : Error(ErrorCategory::kValidation, message),
        collection_(std::move(collection)),
        index_(index) {}

  const std::string& collection() const noexcept { return collection_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::string collection_;
  std::size_t index_;
};

/// Raised when a matrix row has zero norm or a centroid vanishes.
class DegenerateError : public Error {
 public:
  DegenerateError(const std::string& message, std::size_t row)
      : Error(ErrorCategory::kDegenerate, message), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace memvad
