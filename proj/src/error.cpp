#include "aplot/error.hpp"

namespace aplot {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFiniteCost: return "NonFiniteCost";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kDegenerateMarginals: return "DegenerateMarginals";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kGammaOutOfRange: return "GammaOutOfRange";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kBatchTooLarge: return "BatchTooLarge";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidN: return "InvalidN";
    case ErrorCode::kNotEnoughCandidates: return "NotEnoughCandidates";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Error";
}

}  // namespace aplot
