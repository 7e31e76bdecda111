#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/engine/interpreter.hpp"
#include "tapkit/home/catalog.hpp"
#include "tapkit/home/registry.hpp"

namespace tapkit::gateway {

struct ScenarioStep {
  enum class Kind { kRegister, kUnregister, kEmit, kSetCritical, kMarker };

  SimTime at = 0;  // offset from the moment the scenario is loaded
  Kind kind = Kind::kMarker;
  int line = 0;
  home::DeviceDescriptor device;                  // register
  std::map<std::string, home::Value> initial;     // register
  std::string device_id;                          // unregister, emit, critical
  std::string event;                              // emit
  std::map<std::string, home::Value> payload;     // emit
  bool critical = false;                          // critical
  std::string label;                              // marker
};

std::string_view to_string(ScenarioStep::Kind k);

struct Scenario {
  std::string name;
  std::vector<ScenarioStep> steps;  // sorted by time, file order among ties
};

/// Parses the line format described in docs/scenario.md. Throws
/// MalformedScenario with a "line N:" prefix.
Scenario parse_scenario(std::string_view text, const home::KindCatalog& catalog);
Scenario load_scenario(const std::filesystem::path& path, const home::KindCatalog& catalog);

/// Runs one step against the interpreter, which then settles.
void apply_step(const ScenarioStep& step, engine::Interpreter& interpreter);

nlohmann::json to_json(const ScenarioStep& step);

/// Durations as written in scenarios: plain milliseconds, or a number
/// followed by h, min, s or ms, or H:MM:SS.
std::optional<SimTime> parse_duration(std::string_view text);

}  // namespace tapkit::gateway
