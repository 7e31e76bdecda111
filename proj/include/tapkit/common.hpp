#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tapkit {

/// Simulated time: integer milliseconds since scenario start.
using SimTime = std::int64_t;

constexpr SimTime kMillisPerDay = 24LL * 60 * 60 * 1000;

enum class ErrorCode {
  kUnknownKind,
  kKindMismatch,
  kDuplicateDevice,
  kDuplicateName,
  kDomainViolation,
  kUnknownDevice,
  kMissingDevice,
  kUnsupportedAction,
  kUnknownVariable,
  kCriticalDeviceDenied,
  kSchemaViolation,
  kSyntaxError,
  kInvalidInsertionPoint,
  kStaleOption,
  kAlreadyRunning,
  kNotRunning,
  kUnknownProgram,
  kValidationFailed,
  kTimeReversal,
  kTimeRegression,
  kMalformedCursor,
  kStaleSnapshot,
  kMalformedCatalog,
  kMalformedScenario,
  kMalformedDocument,
  kWrongClockMode,
  kIo,
};

/// Stable machine-readable name, used in API error envelopes.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Child-index chain from the program root to an AST node.
using AstPath = std::vector<int>;

std::string path_to_string(const AstPath& path);
AstPath path_from_string(std::string_view text);

/// True when `prefix` is an ancestor-or-self of `path`.
bool path_has_prefix(const AstPath& path, const AstPath& prefix);

}  // namespace tapkit
