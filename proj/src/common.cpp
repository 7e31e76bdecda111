#include "tapkit/common.hpp"

#include <algorithm>
#include <charconv>

namespace tapkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownKind: return "unknown-kind";
    case ErrorCode::kKindMismatch: return "kind-mismatch";
    case ErrorCode::kDuplicateDevice: return "duplicate-device";
    case ErrorCode::kDuplicateName: return "duplicate-name";
    case ErrorCode::kDomainViolation: return "domain-violation";
    case ErrorCode::kUnknownDevice: return "unknown-device";
    case ErrorCode::kMissingDevice: return "missing-device";
    case ErrorCode::kUnsupportedAction: return "unsupported-action";
    case ErrorCode::kUnknownVariable: return "unknown-variable";
    case ErrorCode::kCriticalDeviceDenied: return "critical-device-denied";
    case ErrorCode::kSchemaViolation: return "schema-violation";
    case ErrorCode::kSyntaxError: return "syntax-error";
    case ErrorCode::kInvalidInsertionPoint: return "invalid-insertion-point";
    case ErrorCode::kStaleOption: return "stale-option";
    case ErrorCode::kAlreadyRunning: return "already-running";
    case ErrorCode::kNotRunning: return "not-running";
    case ErrorCode::kUnknownProgram: return "unknown-program";
    case ErrorCode::kValidationFailed: return "validation-failed";
    case ErrorCode::kTimeReversal: return "time-reversal";
    case ErrorCode::kTimeRegression: return "time-regression";
    case ErrorCode::kMalformedCursor: return "malformed-cursor";
    case ErrorCode::kStaleSnapshot: return "stale-snapshot";
    case ErrorCode::kMalformedCatalog: return "malformed-catalog";
    case ErrorCode::kMalformedScenario: return "malformed-scenario";
    case ErrorCode::kMalformedDocument: return "malformed-document";
    case ErrorCode::kWrongClockMode: return "wrong-clock-mode";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

std::string path_to_string(const AstPath& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i != 0) out += '.';
    out += std::to_string(path[i]);
  }
  return out;
}

AstPath path_from_string(std::string_view text) {
  AstPath path;
  if (text.empty()) return path;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('.', start);
    if (end == std::string_view::npos) end = text.size();
    int value = 0;
    auto piece = text.substr(start, end - start);
    auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), value);
    if (ec != std::errc{} || ptr != piece.data() + piece.size() || value < 0) {
      throw Error(ErrorCode::kInvalidInsertionPoint, "malformed AST path '" + std::string(text) + "'");
    }
    path.push_back(value);
    start = end + 1;
  }
  return path;
}

bool path_has_prefix(const AstPath& path, const AstPath& prefix) {
  return prefix.size() <= path.size() && std::equal(prefix.begin(), prefix.end(), path.begin());
}

}  // namespace tapkit
