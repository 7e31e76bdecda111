#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/home/registry.hpp"
#include "tapkit/lang/ast.hpp"
#include "tapkit/lang/grammar.hpp"

namespace tapkit::lang {

struct Binding {
  AstPath path;
  std::string device_id;
};

/// A ById reference to a device that is Missing or was never registered.
struct UnknownReference {
  AstPath path;
  std::string device_id;
  std::string last_name;  // empty when never seen
};

struct TypeError {
  AstPath path;
  std::string message;
};

struct ValidationReport {
  std::vector<Binding> bindings;
  std::vector<UnknownReference> unknown;
  std::vector<TypeError> errors;
  std::vector<AstPath> unknown_programs;  // Start/Stop of programs not in the store

  bool ok() const { return errors.empty(); }
};

nlohmann::json to_json(const ValidationReport& r);

/// Checks references and types against the registry. `programs` is the
/// program store's index, used for Start/Stop references.
ValidationReport validate(const Program& program, const home::RegistrySnapshot& registry,
                          const std::vector<ProgramName>& programs = {});

/// Whether a device falls under a selector, ignoring availability.
bool selector_matches(const EntitySelector& selector, const home::DeviceDescriptor& device);

/// Available devices a selector denotes right now, ordered by id.
std::vector<std::string> resolve_selector(const EntitySelector& selector, const home::RegistrySnapshot& registry);

/// Every device (Available or Missing) a selector denotes, ordered by id.
std::vector<std::string> expand_selector(const EntitySelector& selector, const home::RegistrySnapshot& registry);

/// Paths of ById selectors in a program, paired with their device ids.
std::vector<Binding> device_references(const Program& program);

}  // namespace tapkit::lang
