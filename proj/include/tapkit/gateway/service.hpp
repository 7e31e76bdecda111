#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/engine/interpreter.hpp"
#include "tapkit/gateway/program_store.hpp"
#include "tapkit/gateway/scenario.hpp"
#include "tapkit/home/registry.hpp"
#include "tapkit/lang/grammar.hpp"
#include "tapkit/trace/trace_log.hpp"

namespace tapkit::gateway {

struct ServiceConfig {
  std::filesystem::path state_dir;
  std::optional<std::filesystem::path> catalog;   // builtin catalog when empty
  std::optional<std::filesystem::path> scenario;  // loaded paused
  engine::ClockMode clock_mode = engine::ClockMode::kSimulated;
  double clock_factor = 1.0;
};

struct ApiCommand {
  std::string id;
  std::string verb;
  nlohmann::json payload = nlohmann::json::object();
};

struct ApiReply {
  std::string id;
  bool ok = true;
  nlohmann::json result;
  std::string error_code;  // kebab-case ErrorCode name when !ok
  std::string message;
  nlohmann::json error_details;  // e.g. syntax error position and expected terminals
  std::uint64_t generation = 0;          // registry generation after the command
  std::uint64_t grammar_generation = 0;  // editing grammar generation after the command
  SimTime now = 0;
};

nlohmann::json to_json(const ApiReply& r);

/// One push on the event stream. `id` increases by one per message.
struct StreamMessage {
  std::uint64_t id = 0;
  std::string type;  // trace | registry | snapshot | clock
  nlohmann::json data;
};

/// Owns the home, the interpreter, the trace log and the program store.
/// Every command runs on one loop thread in arrival order.
class Service {
 public:
  using Listener = std::function<void(const StreamMessage&)>;

  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiReply execute(const ApiCommand& command);
  /// Convenience: execute and return the result, rethrowing failures as Error.
  nlohmann::json call(const std::string& verb, nlohmann::json payload = nlohmann::json::object());

  /// Verbs execute() understands.
  static const std::vector<std::string>& verbs();

  std::uint64_t subscribe(Listener listener);
  void unsubscribe(std::uint64_t token);

  /// Raw log export as newline-delimited JSON.
  std::string export_traces(const nlohmann::json& query, bool redacted);

  const ServiceConfig& config() const { return config_; }
  trace::TraceLog& trace_log() { return *log_; }

 private:
  template <typename F>
  auto on_loop(F&& f) -> decltype(f());
  void loop_main();
  void driver_main();

  nlohmann::json dispatch(const std::string& verb, const nlohmann::json& payload);
  const lang::Grammar& editing_grammar();
  std::uint64_t grammar_generation() const;
  void after_command();
  void publish(std::string type, nlohmann::json data);

  // Verb handlers, all on the loop thread.
  nlohmann::json list_devices();
  nlohmann::json register_device(const nlohmann::json& p);
  nlohmann::json device_action(const nlohmann::json& p);
  nlohmann::json device_event(const nlohmann::json& p);
  nlohmann::json list_programs();
  nlohmann::json get_program(const std::string& id);
  nlohmann::json save_program(const nlohmann::json& p);
  nlohmann::json check_program(const nlohmann::json& p);
  nlohmann::json start_program(const std::string& id);
  nlohmann::json keyboard(const std::string& verb, const nlohmann::json& p);
  nlohmann::json traces(const nlohmann::json& p, bool redacted);
  nlohmann::json depgraph(const nlohmann::json& p);
  nlohmann::json clock_state();
  nlohmann::json clock_set(const nlohmann::json& p);
  nlohmann::json clock_advance(const nlohmann::json& p);
  nlohmann::json scenario_state();
  nlohmann::json scenario_load(const nlohmann::json& p);
  nlohmann::json scenario_step();
  void load_scenario(Scenario sc);
  void reset_driver_base();

  ServiceConfig config_;
  std::unique_ptr<trace::TraceLog> log_;
  std::unique_ptr<home::Registry> registry_;
  std::unique_ptr<engine::Interpreter> interpreter_;
  std::unique_ptr<ProgramStore> store_;

  std::optional<lang::Grammar> grammar_;
  std::uint64_t grammar_stamp_ = 0;

  // Scenario bookkeeping.
  std::optional<Scenario> scenario_;
  SimTime scenario_base_ = 0;
  std::vector<nlohmann::json> scenario_log_;  // steps applied, with failures

  // Stream.
  std::mutex listeners_mutex_;
  std::map<std::uint64_t, Listener> listeners_;
  std::uint64_t next_listener_ = 1;
  std::uint64_t next_message_ = 1;
  std::uint64_t trace_token_ = 0;
  std::map<std::string, nlohmann::json> last_snapshots_;
  SimTime last_now_ = 0;

  // Command loop.
  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread loop_;
  std::thread::id loop_id_;

  // Wall-clock driver for the accelerated and realtime modes.
  std::thread driver_;
  std::atomic<bool> driver_stop_{false};
  std::int64_t driver_wall_base_ = 0;
  SimTime driver_sim_base_ = 0;
  std::optional<SimTime> driver_until_;
};

}  // namespace tapkit::gateway
