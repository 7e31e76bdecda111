#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace tapkit::home {

struct TimeOfDay {
  int minutes = 0;  // 0..1439

  auto operator<=>(const TimeOfDay&) const = default;
};

std::string format_time(TimeOfDay t);
std::optional<TimeOfDay> parse_time(std::string_view text);

/// A typed state, payload, argument, or literal value. Enum symbols are
/// carried as strings.
using Value = std::variant<bool, std::int64_t, std::string, TimeOfDay>;

/// Tagged encoding used wherever a value travels without its domain
/// (ASTs, program documents): {"bool":..} {"int":..} {"sym":..} {"time":"HH:MM"}.
nlohmann::json tagged_json(const Value& v);
Value value_from_tagged_json(const nlohmann::json& j);

/// Human-readable rendering without a domain (booleans as true/false).
std::string debug_string(const Value& v);

enum class DomainType { kBoolean, kInteger, kPercent, kEnum, kTimeOfDay };

std::string_view to_string(DomainType type);

struct Domain {
  DomainType type = DomainType::kBoolean;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::vector<std::string> symbols;
  std::string false_label = "false";
  std::string true_label = "true";

  static Domain boolean(std::string false_label = "false", std::string true_label = "true");
  static Domain integer(std::int64_t lo, std::int64_t hi);
  static Domain percent();
  static Domain enumeration(std::vector<std::string> symbols);
  static Domain time_of_day();

  bool contains(const Value& v) const;
  Value default_value() const;

  /// Ordered domains admit <, <=, >, >= comparisons.
  bool ordered() const;
  /// Booleans and enums are offered value by value; the rest are literal classes.
  bool enumerable() const;
  std::vector<Value> enumerate() const;

  /// Canonical single-word literal.
  std::string format(const Value& v) const;
  std::optional<Value> parse(std::string_view word) const;

  /// Plain JSON (as found in API payloads and the catalog) to a value of this domain.
  Value from_json(const nlohmann::json& j) const;
  nlohmann::json to_plain_json(const Value& v) const;

  /// Short description such as "int[0..100]" or "enum{red,green}".
  std::string describe() const;

  bool operator==(const Domain&) const = default;
};

Domain domain_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Domain& d);

/// Three-way comparison of two values of the same alternative.
std::partial_ordering compare_values(const Value& a, const Value& b);

}  // namespace tapkit::home
