#include "reid/error.hpp"

namespace reid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kBadValue: return "BadValue";
    case ErrorCode::kMalformedManifest: return "MalformedManifest";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kAllQueriesSkipped: return "AllQueriesSkipped";
    case ErrorCode::kBadParams: return "BadParams";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kBadLabel: return "BadLabel";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kEmptyMap: return "EmptyMap";
    case ErrorCode::kNotEnoughIdentities: return "NotEnoughIdentities";
    case ErrorCode::kUsage: return "Usage";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return 2;
    case ErrorCode::kMissingFile: return 3;
    case ErrorCode::kSizeMismatch: return 4;
    case ErrorCode::kBadValue: return 5;
    case ErrorCode::kMalformedManifest: return 6;
    case ErrorCode::kIoFailure: return 7;
    case ErrorCode::kDimMismatch: return 8;
    case ErrorCode::kZeroVector: return 9;
    case ErrorCode::kAllQueriesSkipped: return 10;
    case ErrorCode::kBadParams: return 11;
    case ErrorCode::kShapeMismatch: return 12;
    case ErrorCode::kBadLabel: return 13;
    case ErrorCode::kDegenerateBatch: return 14;
    case ErrorCode::kEmptyMap: return 15;
    case ErrorCode::kNotEnoughIdentities: return 16;
  }
  return 1;
}

}  // namespace reid
