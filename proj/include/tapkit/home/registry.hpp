#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/common.hpp"
#include "tapkit/home/catalog.hpp"
#include "tapkit/home/value.hpp"
#include "tapkit/trace/trace_log.hpp"

namespace tapkit::home {

enum class Availability { kAvailable, kMissing };

std::string_view to_string(Availability a);

struct DeviceDescriptor {
  std::string id;
  std::string kind;
  std::string display_name;
  std::string location;
  std::map<std::string, std::string> properties;
  bool critical = false;
  Availability availability = Availability::kAvailable;

  bool available() const { return availability == Availability::kAvailable; }
  bool operator==(const DeviceDescriptor&) const = default;
};

struct StateSlot {
  Value value;
  SimTime updated_at = 0;

  bool operator==(const StateSlot&) const = default;
};

struct DeviceState {
  std::map<std::string, StateSlot> values;

  bool operator==(const DeviceState&) const = default;
};

struct HomeEvent {
  std::string source;
  std::string event_type;
  std::map<std::string, Value> payload;
  SimTime at = 0;
  std::string cause;
  bool from_missing = false;  // set by the registry on intake

  bool operator==(const HomeEvent&) const = default;
};

struct RegistryDelta {
  enum class Kind { kRegistered, kReappeared, kUnregistered, kCriticalChanged, kNoOp };

  Kind kind = Kind::kNoOp;
  std::string device_id;
  std::uint64_t generation = 0;
};

std::string_view to_string(RegistryDelta::Kind kind);

struct StateReading {
  Value value;
  bool stale = false;  // the device is Missing; value is frozen
  SimTime updated_at = 0;
};

struct ActionOutcome {
  std::map<std::string, Value> changed;  // variable -> new value
  std::vector<HomeEvent> events;
};

/// Immutable copy of the registry contents, used by pure functions
/// (grammar derivation, validation, analysis).
struct RegistrySnapshot {
  std::shared_ptr<const KindCatalog> catalog;
  std::uint64_t generation = 0;
  std::map<std::string, DeviceDescriptor> devices;
  std::map<std::string, DeviceState> states;

  const DeviceDescriptor* find(std::string_view id) const;
  const DeviceKind* kind_of(std::string_view id) const;
  std::vector<const DeviceDescriptor*> available() const;
  bool operator==(const RegistrySnapshot& other) const {
    return generation == other.generation && devices == other.devices && states == other.states;
  }
};

/// Live device registry. Mutated only from the interpreter loop.
class Registry {
 public:
  using Observer = std::function<void(const RegistryDelta&)>;

  explicit Registry(std::shared_ptr<const KindCatalog> catalog, trace::TraceSink* sink = nullptr);

  RegistryDelta register_device(DeviceDescriptor descriptor, const std::map<std::string, Value>& initial_state,
                                const std::string& cause = std::string(trace::cause::kScenario));
  RegistryDelta unregister_device(const std::string& id,
                                  const std::string& cause = std::string(trace::cause::kScenario));
  RegistryDelta set_critical(const std::string& id, bool critical,
                             const std::string& cause = std::string(trace::cause::kDashboard));

  /// `context` is merged into the action trace entry's details.
  ActionOutcome apply_action(const std::string& id, const std::string& action, const std::vector<Value>& args,
                             const std::string& cause, const nlohmann::json& context = nlohmann::json::object());

  StateReading read_state(const std::string& id, const std::string& variable) const;

  /// Validates, traces, and queues an event for the interpreter.
  void emit_event(HomeEvent event);
  /// Applies an event's declared state effects (no-op for Missing sources).
  std::map<std::string, Value> apply_event_effects(const HomeEvent& event);

  bool has_pending_events() const { return !inbound_.empty(); }
  HomeEvent pop_event();
  std::size_t pending_events() const { return inbound_.size(); }

  const RegistrySnapshot& view() const { return data_; }
  RegistrySnapshot snapshot() const { return data_; }
  std::uint64_t generation() const { return data_.generation; }
  const KindCatalog& catalog() const { return *data_.catalog; }
  std::shared_ptr<const KindCatalog> catalog_ptr() const { return data_.catalog; }

  SimTime now() const { return now_; }
  void set_now(SimTime t);

  void subscribe(Observer observer) { observers_.push_back(std::move(observer)); }

  /// Fills in unspecified variables from kind initials and checks every domain.
  DeviceState make_state(const DeviceKind& kind, const std::map<std::string, Value>& values) const;

 private:
  const DeviceKind& kind_for(const DeviceDescriptor& d) const;
  void record(trace::Category category, const std::string& subject, nlohmann::json details,
              const std::string& cause);
  RegistryDelta bump(RegistryDelta::Kind kind, const std::string& id);
  void validate_event(const HomeEvent& event, const DeviceKind& kind) const;

  RegistrySnapshot data_;
  trace::TraceSink* sink_;
  std::deque<HomeEvent> inbound_;
  std::vector<Observer> observers_;
  SimTime now_ = 0;
};

nlohmann::json to_json(const DeviceDescriptor& d);
DeviceDescriptor descriptor_from_json(const nlohmann::json& j);
nlohmann::json state_to_json(const DeviceState& s, const DeviceKind& kind);

}  // namespace tapkit::home
