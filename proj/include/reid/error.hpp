#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reid {

enum class ErrorCode {
  kMissingFile,
  kSizeMismatch,
  kBadValue,
  kMalformedManifest,
  kIoFailure,
  kDimMismatch,
  kZeroVector,
  kAllQueriesSkipped,
  kBadParams,
  kShapeMismatch,
  kBadLabel,
  kDegenerateBatch,
  kEmptyMap,
  kNotEnoughIdentities,
  kUsage,
};

std::string_view to_string(ErrorCode code);

// Process exit status used by the CLI for each error class. 0 and 1 are
// reserved for success and unclassified failures.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace reid
