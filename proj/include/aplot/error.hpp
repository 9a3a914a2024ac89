#ifndef APLOT_ERROR_HPP_
#define APLOT_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aplot {

enum class ErrorCode {
  kNonFiniteCost,
  kNonFiniteInput,
  kDegenerateMarginals,
  kShapeMismatch,
  kTooLarge,
  kZeroVector,
  kGammaOutOfRange,
  kDimensionMismatch,
  kEmptyDataset,
  kBatchTooLarge,
  kInvalidConfig,
  kParseError,
  kInvalidN,
  kNotEnoughCandidates,
  kIoError,
};

const char* error_code_name(ErrorCode code);

/// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure tied to a 1-based line of an input document.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace aplot

#endif  // APLOT_ERROR_HPP_
