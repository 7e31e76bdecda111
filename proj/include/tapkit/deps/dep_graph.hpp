#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/engine/interpreter.hpp"
#include "tapkit/home/registry.hpp"
#include "tapkit/lang/ast.hpp"

namespace tapkit::deps {

enum class EdgeKind { kWrites, kReads, kStarts, kStops };

std::string_view to_string(EdgeKind k);

struct ProgramNode {
  std::string id;
  std::string name;
  bool stored = true;  // false for a Start/Stop target that is not a known program
  engine::Status status = engine::Status::kStopped;
  bool operator==(const ProgramNode&) const = default;
};

struct DeviceNode {
  std::string id;
  std::string name;
  std::string kind;
  home::Availability availability = home::Availability::kAvailable;
  bool ghost = false;  // referenced by id but never registered

  bool available() const { return availability == home::Availability::kAvailable; }
  bool operator==(const DeviceNode&) const = default;
};

struct Edge {
  EdgeKind kind = EdgeKind::kWrites;
  std::string from;   // program id
  std::string to;     // device id, or program id for start/stop
  AstPath path;       // statement, trigger or atom that produced it
  std::string label;  // action, event or variable name
  bool operator==(const Edge&) const = default;
};

struct Conflict {
  std::string device;
  std::vector<std::string> writers;  // sorted program ids
  bool active = false;               // at least two writers running together
  bool operator==(const Conflict&) const = default;
};

struct DepGraph {
  std::uint64_t generation = 0;  // registry generation it was extracted against
  bool annotated = false;
  std::vector<ProgramNode> programs;
  std::vector<DeviceNode> devices;
  std::vector<Edge> edges;
  std::vector<Conflict> conflicts;

  const ProgramNode* program(std::string_view id) const;
  const DeviceNode* device(std::string_view id) const;
  const Conflict* conflict(std::string_view device) const;
  bool operator==(const DepGraph&) const = default;
};

/// Pure extraction. Plural selectors expand against every registered
/// device, Missing ones included.
DepGraph extract(const std::vector<lang::Program>& programs, const home::RegistrySnapshot& registry);

/// Adds run status and marks conflicts active or latent. Throws
/// StaleSnapshot when a snapshot was taken at another registry generation.
DepGraph annotate(DepGraph graph, const std::vector<engine::InstanceSnapshot>& snapshots);

nlohmann::json to_json(const DepGraph& g);
/// Graphviz rendering.
std::string to_dot(const DepGraph& g);

}  // namespace tapkit::deps
