#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/engine/sim_clock.hpp"
#include "tapkit/home/registry.hpp"
#include "tapkit/lang/ast.hpp"
#include "tapkit/trace/trace_log.hpp"

namespace tapkit::engine {

enum class Status { kStopped, kRunning, kDegraded };

std::string_view to_string(Status s);

struct InstanceSnapshot {
  std::string program_id;
  std::string name;
  Status status = Status::kStopped;
  std::map<AstPath, std::uint64_t> statement_counters;
  std::map<int, std::uint64_t> rule_counters;
  /// Armed rules still waiting: every event rule, and state rules whose
  /// condition is currently false.
  std::set<int> waiting;
  std::set<AstPath> unknown_refs;
  std::uint64_t start_order = 0;  // 0 when never started
  SimTime at = 0;                 // clock reading when the copy was taken
  std::uint64_t registry_generation = 0;

  bool running() const { return status != Status::kStopped; }
  bool operator==(const InstanceSnapshot&) const = default;
};

nlohmann::json to_json(const InstanceSnapshot& s);

struct Firing {
  std::string program_id;
  std::uint64_t start_order = 0;
  int rule = 0;
  SimTime at = 0;
  std::optional<home::HomeEvent> event;  // empty for a state rule's rising edge
  std::uint64_t epoch = 0;
};

/// Firings at one instant beyond this are dropped and reported once.
inline constexpr std::uint64_t kCascadeLimit = 10000;

/// The execution loop. Owns the clock; shares the registry and the trace
/// sink. Every public mutator runs the resulting cascade to quiescence
/// before returning. Not thread safe: callers serialize.
class Interpreter {
 public:
  Interpreter(home::Registry& registry, trace::TraceSink* sink);
  Interpreter(const Interpreter&) = delete;
  Interpreter& operator=(const Interpreter&) = delete;

  SimClock& clock() { return clock_; }
  const SimClock& clock() const { return clock_; }
  SimTime now() const { return clock_.now(); }
  home::Registry& registry() { return registry_; }

  /// Makes a program startable. Replacing a running program leaves the
  /// running instance on its old text until it is restarted.
  void install(lang::Program program);
  /// Stops the program if needed and forgets it.
  void uninstall(const std::string& program_id, const std::string& cause = std::string(trace::cause::kDashboard));
  bool installed(const std::string& program_id) const;
  std::vector<std::string> installed_ids() const;

  InstanceSnapshot start(const std::string& program_id, const std::string& cause = std::string(trace::cause::kDashboard));
  InstanceSnapshot stop(const std::string& program_id, const std::string& cause = std::string(trace::cause::kDashboard));
  InstanceSnapshot snapshot(const std::string& program_id) const;
  std::vector<InstanceSnapshot> snapshots() const;
  /// Ids of running programs in start order.
  std::vector<std::string> running() const;

  /// Applies an event's state effects and collects the firings it causes.
  /// Does not execute them.
  std::vector<Firing> dispatch(const home::HomeEvent& event);
  void execute_firing(const Firing& firing);
  /// Drains the inbound event queue and settles state rules.
  void process();

  /// Fires every timer due in (now, to] in order, then sets now = to.
  /// Requires the simulated mode.
  void advance_clock(SimTime to);
  /// Same without the mode check; used by wall-clock drivers.
  void advance_to(SimTime to);

  /// Timer whose callback runs inside the loop followed by process().
  std::uint64_t schedule(SimTime due, std::string owner, std::string purpose, std::function<void()> fire);

  // Registry commands that run the resulting cascade.
  home::RegistryDelta register_device(home::DeviceDescriptor d, const std::map<std::string, home::Value>& initial,
                                      const std::string& cause = std::string(trace::cause::kScenario));
  home::RegistryDelta unregister_device(const std::string& id,
                                        const std::string& cause = std::string(trace::cause::kScenario));
  home::RegistryDelta set_critical(const std::string& id, bool critical,
                                   const std::string& cause = std::string(trace::cause::kDashboard));
  void emit_event(home::HomeEvent event);
  home::ActionOutcome device_action(const std::string& id, const std::string& action,
                                    const std::vector<home::Value>& args,
                                    const std::string& cause = std::string(trace::cause::kDashboard));

 private:
  struct RuleState {
    bool last = false;  // state rules: condition value at the last evaluation
  };
  struct Instance {
    std::shared_ptr<const lang::Program> program;  // the text it was started with
    Status status = Status::kStopped;
    bool armed = false;
    std::uint64_t epoch = 0;
    std::uint64_t start_order = 0;
    std::map<AstPath, std::uint64_t> statement_counters;
    std::map<int, std::uint64_t> rule_counters;
    std::vector<RuleState> rules;
    std::set<AstPath> unknown_refs;
  };
  using StrikeKey = std::tuple<std::string, std::string, int>;  // kind, event, minute of day

  Instance& instance(const std::string& id);
  const Instance& instance(const std::string& id) const;
  InstanceSnapshot snapshot_of(const std::string& id, const Instance& inst) const;

  void start_instance(const std::string& id, const std::string& cause, const nlohmann::json& via);
  void stop_instance(const std::string& id, const std::string& cause, const nlohmann::json& details);
  void arm(const std::string& id);
  void run_list(const std::string& id, std::uint64_t epoch, int rule, std::size_t from);
  void run_statement(const std::string& id, Instance& inst, const lang::Statement& s, const AstPath& path, int rule,
                     std::size_t index, bool& suspend);
  bool evaluate(const lang::StateExpr& e) const;
  bool evaluate_atom(const lang::Atom& a) const;
  std::vector<Firing> rising_edges();
  std::vector<std::pair<std::uint64_t, std::string>> by_start_order() const;
  void execute_all(std::vector<Firing> firings);
  void refresh_unknown_refs();
  void update_status(const std::string& id, Instance& inst);
  std::set<AstPath> unresolved(const lang::Program& p) const;
  void refresh_strikes();
  void strike(const StrikeKey& key);
  void trace(trace::Category category, const std::string& subject, nlohmann::json details, const std::string& cause);
  void sync_registry_clock();

  home::Registry& registry_;
  trace::TraceSink* sink_;
  SimClock clock_;
  std::map<std::string, lang::Program> programs_;
  std::map<std::string, Instance> instances_;
  std::uint64_t next_start_order_ = 1;
  std::map<StrikeKey, std::uint64_t> strike_timers_;
  SimTime cascade_at_ = -1;
  std::uint64_t cascade_count_ = 0;
  bool cascade_reported_ = false;
};

}  // namespace tapkit::engine
