#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/home/value.hpp"

namespace tapkit::home {

/// Where an effect takes its written value from: a literal or a named
/// action parameter / event payload field.
struct EffectSource {
  std::variant<Value, std::string> source;

  bool is_reference() const { return std::holds_alternative<std::string>(source); }
  bool operator==(const EffectSource&) const = default;
};

struct VariableSpec {
  std::string name;
  Domain domain;
  Value initial;
};

struct ParamSpec {
  std::string name;
  std::string phrase;  // keyword shown before the argument, e.g. "to"
  Domain domain;
};

struct ActionSpec {
  std::string name;
  std::string phrase;  // e.g. "switch off"
  std::vector<ParamSpec> params;
  std::map<std::string, EffectSource> effect;  // variable -> written value
  bool power_removing = false;
};

/// Optional payload field a trigger may (or must) pin, e.g. the time a
/// clock strikes.
struct EventKey {
  std::string field;
  std::string phrase;  // may be empty
  bool required = false;
};

/// Emission of an event as a consequence of a state change.
struct EventCondition {
  std::string variable;
  std::optional<Value> becomes;  // empty: any change
};

struct EventSpec {
  std::string name;
  std::string phrase;  // e.g. "is turned on"
  std::map<std::string, Domain> payload;
  std::optional<EventKey> key;
  std::map<std::string, EffectSource> sets;  // state effects applied on dispatch
  std::optional<EventCondition> when;
  // Generated by the interpreter at the time-of-day named by the key field.
  bool time_of_day_schedule = false;
};

struct DeviceKind {
  std::string name;
  std::vector<VariableSpec> variables;  // declaration order
  std::map<std::string, EventSpec> events;
  std::map<std::string, ActionSpec> actions;

  const VariableSpec* variable(std::string_view var) const;
  const EventSpec* event(std::string_view ev) const;
  const ActionSpec* action(std::string_view act) const;
  const EventSpec* event_by_phrase(std::string_view phrase) const;
};

/// The shipped vocabulary of device kinds. Immutable once loaded.
class KindCatalog {
 public:
  static KindCatalog from_json(const nlohmann::json& j);
  static KindCatalog load(const std::filesystem::path& path);
  /// The catalog shipped in data/catalog.json, compiled in.
  static std::shared_ptr<const KindCatalog> builtin();

  const DeviceKind* find(std::string_view kind) const;
  const std::map<std::string, DeviceKind, std::less<>>& kinds() const { return kinds_; }

  /// Phrase of an action name; identical across every kind declaring it.
  const std::string* action_phrase(std::string_view action) const;
  const std::string* action_by_phrase(std::string_view phrase) const;

  nlohmann::json to_json() const;

 private:
  std::map<std::string, DeviceKind, std::less<>> kinds_;
  std::map<std::string, std::string, std::less<>> action_phrases_;  // name -> phrase
  std::map<std::string, std::string, std::less<>> phrase_actions_;  // phrase -> name
};

}  // namespace tapkit::home
