#include "tapkit/gateway/service.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tapkit/deps/dep_graph.hpp"
#include "tapkit/keyboard/keyboard.hpp"
#include "tapkit/lang/parser.hpp"
#include "tapkit/lang/render.hpp"
#include "tapkit/lang/validate.hpp"

namespace tapkit::gateway {

namespace {

constexpr std::string_view kScenarioOwner = "scenario";

/// An Error that carries a structured explanation for the reply.
class DetailedError : public Error {
 public:
  DetailedError(ErrorCode code, const std::string& message, nlohmann::json details)
      : Error(code, message), details_(std::move(details)) {}
  const nlohmann::json& details() const { return details_; }

 private:
  nlohmann::json details_;
};

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string need_string(const nlohmann::json& p, const char* key) {
  if (!p.is_object() || !p.contains(key) || !p.at(key).is_string()) {
    throw Error(ErrorCode::kMalformedDocument, std::string("expected a string field '") + key + "'");
  }
  return p.at(key).get<std::string>();
}

std::vector<std::string> string_list(const nlohmann::json& j) {
  std::vector<std::string> out;
  if (j.is_string()) {
    std::istringstream in(j.get<std::string>());
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) out.push_back(item);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) out.push_back(v.get<std::string>());
  } else if (!j.is_null()) {
    throw Error(ErrorCode::kMalformedDocument, "expected a list or a comma-separated string");
  }
  return out;
}

std::int64_t integer_field(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const auto s = v.get<std::string>();
      const auto n = std::stoll(s, &used);
      if (used == s.size()) return n;
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorCode::kMalformedDocument, std::string("field '") + key + "' must be an integer");
}

trace::TimelineQuery query_from_json(const nlohmann::json& p) {
  trace::TimelineQuery q;
  if (p.contains("from")) q.from = integer_field(p, "from");
  if (p.contains("to")) q.to = integer_field(p, "to");
  if (p.contains("subject")) q.subject = need_string(p, "subject");
  if (p.contains("categories")) {
    for (const auto& c : string_list(p.at("categories"))) q.categories.insert(trace::category_from_string(c));
  }
  if (p.contains("cause")) q.cause = need_string(p, "cause");
  if (p.contains("limit")) q.limit = static_cast<std::size_t>(std::max<std::int64_t>(0, integer_field(p, "limit")));
  if (p.contains("cursor")) q.cursor = need_string(p, "cursor");
  return q;
}

trace::RedactionPolicy policy_from_json(const nlohmann::json& p) {
  trace::RedactionPolicy policy;
  if (p.contains("suppress")) {
    for (const auto& c : string_list(p.at("suppress"))) policy.suppress.insert(trace::category_from_string(c));
  }
  if (p.contains("bucket_ms")) policy.bucket_ms = integer_field(p, "bucket_ms");
  if (policy.bucket_ms < 0) throw Error(ErrorCode::kMalformedDocument, "bucket_ms must not be negative");
  if (p.contains("exempt")) {
    for (const auto& s : string_list(p.at("exempt"))) policy.exempt_subjects.insert(s);
  }
  return policy;
}

}  // namespace

nlohmann::json to_json(const ApiReply& r) {
  nlohmann::json j{{"id", r.id},
                   {"ok", r.ok},
                   {"generation", r.generation},
                   {"grammar_generation", r.grammar_generation},
                   {"now", r.now}};
  if (r.ok) {
    j["result"] = r.result;
  } else {
    j["error"] = {{"code", r.error_code}, {"message", r.message}, {"generation", r.generation}};
    if (!r.error_details.is_null()) j["error"]["details"] = r.error_details;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Construction and the loop

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  std::error_code ec;
  std::filesystem::create_directories(config_.state_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot open state directory " + config_.state_dir.string() + ": " + ec.message());

  auto catalog = config_.catalog ? std::make_shared<const home::KindCatalog>(home::KindCatalog::load(*config_.catalog))
                                 : home::KindCatalog::builtin();
  log_ = std::make_unique<trace::TraceLog>(config_.state_dir / "trace.jsonl");
  registry_ = std::make_unique<home::Registry>(catalog, log_.get());
  // Appends continue where the previous run stopped.
  registry_->set_now(log_->last_at());
  interpreter_ = std::make_unique<engine::Interpreter>(*registry_, log_.get());
  interpreter_->clock().set_mode(config_.clock_mode);
  interpreter_->clock().set_factor(config_.clock_mode == engine::ClockMode::kRealtime ? 1.0 : config_.clock_factor);
  store_ = std::make_unique<ProgramStore>(config_.state_dir / "programs");
  for (const auto& doc : store_->list()) {
    if (doc.ast) interpreter_->install(*doc.ast);
  }
  if (config_.scenario) load_scenario(gateway::load_scenario(*config_.scenario, *catalog));

  last_now_ = interpreter_->now();
  for (const auto& s : interpreter_->snapshots()) {
    auto j = engine::to_json(s);
    j.erase("at");
    j.erase("registry_generation");
    last_snapshots_[s.program_id] = std::move(j);
  }
  trace_token_ = log_->subscribe([this](const trace::TraceEntry& e) { publish("trace", trace::to_json(e)); });
  registry_->subscribe([this](const home::RegistryDelta& d) {
    publish("registry", {{"kind", home::to_string(d.kind)}, {"device", d.device_id}, {"generation", d.generation}});
  });
  reset_driver_base();

  loop_ = std::thread([this] { loop_main(); });
  loop_id_ = loop_.get_id();
  driver_ = std::thread([this] { driver_main(); });
}

Service::~Service() {
  driver_stop_ = true;
  if (driver_.joinable()) driver_.join();
  {
    std::lock_guard lk(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (loop_.joinable()) loop_.join();
  log_->unsubscribe(trace_token_);
}

void Service::loop_main() {
  while (true) {
    std::function<void()> task;
    {
      std::unique_lock lk(queue_mutex_);
      queue_cv_.wait(lk, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    task();
  }
}

template <typename F>
auto Service::on_loop(F&& f) -> decltype(f()) {
  using R = decltype(f());
  if (std::this_thread::get_id() == loop_id_) return f();
  std::packaged_task<R()> task(std::forward<F>(f));
  auto done = task.get_future();
  {
    std::lock_guard lk(queue_mutex_);
    if (stopping_) throw Error(ErrorCode::kIo, "the service is shutting down");
    queue_.push_back([&task] { task(); });
  }
  queue_cv_.notify_one();
  return done.get();
}

void Service::driver_main() {
  while (!driver_stop_) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    try {
      on_loop([this] {
        const auto& clock = interpreter_->clock();
        if (clock.mode() == engine::ClockMode::kSimulated) return;
        auto target = driver_sim_base_ + static_cast<SimTime>(static_cast<double>(wall_ms() - driver_wall_base_) *
                                                              clock.factor());
        if (driver_until_) target = std::min(target, *driver_until_);
        if (target <= interpreter_->now()) return;
        interpreter_->advance_to(target);
        after_command();
      });
    } catch (const std::exception& e) {
      spdlog::error("clock driver: {}", e.what());
    }
  }
}

void Service::reset_driver_base() {
  driver_wall_base_ = wall_ms();
  driver_sim_base_ = interpreter_->now();
}

// ---------------------------------------------------------------------------
// Commands

const std::vector<std::string>& Service::verbs() {
  static const std::vector<std::string> kVerbs = {
      "devices.list",     "devices.register", "devices.unregister", "devices.action",   "devices.critical",
      "devices.event",    "programs.list",    "programs.get",       "programs.save",    "programs.delete",
      "programs.start",   "programs.stop",    "programs.snapshot",  "programs.check",   "grammar.get",
      "keyboard.inspect", "keyboard.options", "keyboard.apply",     "keyboard.delete",  "traces.query",
      "traces.redacted",  "depgraph.get",     "clock.get",          "clock.set",        "clock.advance",
      "scenario.get",     "scenario.load",    "scenario.play",      "scenario.step"};
  return kVerbs;
}

ApiReply Service::execute(const ApiCommand& command) {
  ApiReply r;
  r.id = command.id;
  on_loop([&] {
    try {
      r.result = dispatch(command.verb, command.payload);
    } catch (const lang::SyntaxError& e) {
      r.ok = false;
      r.error_code = std::string(to_string(e.code()));
      r.message = e.what();
      nlohmann::json expected = nlohmann::json::array();
      for (const auto& t : e.expected()) expected.push_back(lang::to_json(t));
      r.error_details = {{"position", e.position()}, {"found", e.found()}, {"expected", expected}};
    } catch (const DetailedError& e) {
      r.ok = false;
      r.error_code = std::string(to_string(e.code()));
      r.message = e.what();
      r.error_details = e.details();
    } catch (const Error& e) {
      r.ok = false;
      r.error_code = std::string(to_string(e.code()));
      r.message = e.what();
    } catch (const nlohmann::json::exception& e) {
      r.ok = false;
      r.error_code = std::string(to_string(ErrorCode::kMalformedDocument));
      r.message = e.what();
    }
    after_command();
    r.generation = registry_->generation();
    r.grammar_generation = grammar_generation();
    r.now = interpreter_->now();
  });
  return r;
}

nlohmann::json Service::call(const std::string& verb, nlohmann::json payload) {
  auto r = execute({"", verb, std::move(payload)});
  if (!r.ok) {
    ErrorCode code = ErrorCode::kIo;
    for (int c = 0; c <= static_cast<int>(ErrorCode::kIo); ++c) {
      if (to_string(static_cast<ErrorCode>(c)) == r.error_code) code = static_cast<ErrorCode>(c);
    }
    throw Error(code, r.message);
  }
  return r.result;
}

nlohmann::json Service::dispatch(const std::string& verb, const nlohmann::json& p) {
  const auto dashboard = std::string(trace::cause::kDashboard);
  if (verb == "devices.list") return list_devices();
  if (verb == "devices.register") return register_device(p);
  if (verb == "devices.unregister") {
    const auto d = interpreter_->unregister_device(need_string(p, "id"), dashboard);
    return {{"kind", home::to_string(d.kind)}, {"device", d.device_id}, {"generation", d.generation}};
  }
  if (verb == "devices.action") return device_action(p);
  if (verb == "devices.critical") {
    if (!p.contains("critical") || !p.at("critical").is_boolean()) {
      throw Error(ErrorCode::kMalformedDocument, "expected a boolean field 'critical'");
    }
    const auto d = interpreter_->set_critical(need_string(p, "id"), p.at("critical").get<bool>(), dashboard);
    return {{"kind", home::to_string(d.kind)}, {"device", d.device_id}, {"generation", d.generation}};
  }
  if (verb == "devices.event") return device_event(p);
  if (verb == "programs.list") return list_programs();
  if (verb == "programs.get") return get_program(need_string(p, "id"));
  if (verb == "programs.save") return save_program(p);
  if (verb == "programs.delete") {
    const auto id = need_string(p, "id");
    if (!store_->find(id)) throw Error(ErrorCode::kUnknownProgram, "no program '" + id + "'");
    interpreter_->uninstall(id);
    store_->remove(id);
    return {{"program_id", id}, {"deleted", true}};
  }
  if (verb == "programs.start") return start_program(need_string(p, "id"));
  if (verb == "programs.stop") {
    const auto id = need_string(p, "id");
    if (!store_->find(id)) throw Error(ErrorCode::kUnknownProgram, "no program '" + id + "'");
    if (!interpreter_->installed(id)) throw Error(ErrorCode::kNotRunning, "program '" + id + "' is not running");
    return engine::to_json(interpreter_->stop(id));
  }
  if (verb == "programs.snapshot") {
    const auto id = need_string(p, "id");
    if (!store_->find(id) || !interpreter_->installed(id)) {
      throw Error(ErrorCode::kUnknownProgram, "no runnable program '" + id + "'");
    }
    return engine::to_json(interpreter_->snapshot(id));
  }
  if (verb == "programs.check") return check_program(p);
  if (verb == "grammar.get") {
    const auto& g = editing_grammar();
    nlohmann::json terminals = nlohmann::json::array();
    for (const auto& t : g.terminals()) terminals.push_back(lang::to_json(t));
    return {{"generation", g.generation()}, {"productions", g.productions()}, {"terminals", terminals}};
  }
  if (verb.starts_with("keyboard.")) return keyboard(verb, p);
  if (verb == "traces.query") return traces(p, false);
  if (verb == "traces.redacted") return traces(p, true);
  if (verb == "depgraph.get") return depgraph(p);
  if (verb == "clock.get") return clock_state();
  if (verb == "clock.set") return clock_set(p);
  if (verb == "clock.advance" || verb == "scenario.play") return clock_advance(p);
  if (verb == "scenario.get") return scenario_state();
  if (verb == "scenario.load") return scenario_load(p);
  if (verb == "scenario.step") return scenario_step();
  throw Error(ErrorCode::kMalformedDocument, "unknown verb '" + verb + "'");
}

std::uint64_t Service::grammar_generation() const { return registry_->generation() + store_->generation(); }

const lang::Grammar& Service::editing_grammar() {
  const auto stamp = grammar_generation();
  if (!grammar_ || grammar_stamp_ != stamp) {
    grammar_ = lang::Grammar::derive(registry_->view(), store_->program_names());
    grammar_->stamp(stamp);
    grammar_stamp_ = stamp;
  }
  return *grammar_;
}

void Service::after_command() {
  std::set<std::string> seen;
  for (const auto& s : interpreter_->snapshots()) {
    seen.insert(s.program_id);
    auto j = engine::to_json(s);
    j.erase("at");
    j.erase("registry_generation");
    auto it = last_snapshots_.find(s.program_id);
    if (it != last_snapshots_.end() && it->second == j) continue;
    last_snapshots_[s.program_id] = j;
    publish("snapshot", std::move(j));
  }
  for (auto it = last_snapshots_.begin(); it != last_snapshots_.end();) {
    if (seen.contains(it->first)) {
      ++it;
      continue;
    }
    publish("snapshot", {{"program_id", it->first}, {"removed", true}});
    it = last_snapshots_.erase(it);
  }
  if (interpreter_->now() != last_now_) {
    last_now_ = interpreter_->now();
    publish("clock", {{"now", last_now_}, {"mode", engine::to_string(interpreter_->clock().mode())}});
  }
}

void Service::publish(std::string type, nlohmann::json data) {
  std::lock_guard lk(listeners_mutex_);
  StreamMessage m{next_message_++, std::move(type), std::move(data)};
  for (const auto& [_, l] : listeners_) l(m);
}

std::uint64_t Service::subscribe(Listener listener) {
  std::lock_guard lk(listeners_mutex_);
  const auto token = next_listener_++;
  listeners_.emplace(token, std::move(listener));
  return token;
}

void Service::unsubscribe(std::uint64_t token) {
  std::lock_guard lk(listeners_mutex_);
  listeners_.erase(token);
}

// ---------------------------------------------------------------------------
// Devices

nlohmann::json Service::list_devices() {
  nlohmann::json out = nlohmann::json::array();
  const auto& view = registry_->view();
  for (const auto& [id, d] : view.devices) {
    auto j = home::to_json(d);
    j["state"] = home::state_to_json(view.states.at(id), *view.kind_of(id));
    out.push_back(std::move(j));
  }
  return out;
}

nlohmann::json Service::register_device(const nlohmann::json& p) {
  auto d = home::descriptor_from_json(p.at("device"));
  const auto* kind = registry_->catalog().find(d.kind);
  if (!kind) throw Error(ErrorCode::kUnknownKind, "unknown kind '" + d.kind + "'");
  std::map<std::string, home::Value> initial;
  const auto state = p.value("state", nlohmann::json::object());
  for (const auto& [var, v] : state.items()) {
    const auto* spec = kind->variable(var);
    if (!spec) throw Error(ErrorCode::kUnknownVariable, "kind '" + d.kind + "' has no variable '" + var + "'");
    initial[var] = spec->domain.from_json(v);
  }
  const auto delta = interpreter_->register_device(std::move(d), initial, std::string(trace::cause::kDashboard));
  return {{"kind", home::to_string(delta.kind)}, {"device", delta.device_id}, {"generation", delta.generation}};
}

nlohmann::json Service::device_action(const nlohmann::json& p) {
  const auto id = need_string(p, "id");
  const auto action = need_string(p, "action");
  const auto* kind = registry_->view().kind_of(id);
  if (!kind) throw Error(ErrorCode::kUnknownDevice, "unknown device '" + id + "'");
  const auto* spec = kind->action(action);
  if (!spec) throw Error(ErrorCode::kUnsupportedAction, "kind '" + kind->name + "' has no action '" + action + "'");
  const auto raw = p.value("args", nlohmann::json::array());
  if (!raw.is_array() || raw.size() != spec->params.size()) {
    throw Error(ErrorCode::kDomainViolation,
                "action '" + action + "' takes " + std::to_string(spec->params.size()) + " argument(s)");
  }
  std::vector<home::Value> args;
  for (std::size_t i = 0; i < raw.size(); ++i) args.push_back(spec->params[i].domain.from_json(raw[i]));
  const auto outcome = interpreter_->device_action(id, action, args);
  nlohmann::json changed = nlohmann::json::object();
  for (const auto& [var, v] : outcome.changed) changed[var] = kind->variable(var)->domain.to_plain_json(v);
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : outcome.events) events.push_back(e.event_type);
  return {{"device", id}, {"action", action}, {"changed", changed}, {"events", events}};
}

nlohmann::json Service::device_event(const nlohmann::json& p) {
  home::HomeEvent e;
  e.source = need_string(p, "id");
  e.event_type = need_string(p, "event");
  e.cause = std::string(trace::cause::kDashboard);
  const auto* kind = registry_->view().kind_of(e.source);
  if (!kind) throw Error(ErrorCode::kUnknownDevice, "unknown device '" + e.source + "'");
  const auto* spec = kind->event(e.event_type);
  if (!spec) throw Error(ErrorCode::kSchemaViolation, "kind '" + kind->name + "' has no event '" + e.event_type + "'");
  const auto payload = p.value("payload", nlohmann::json::object());
  for (const auto& [field, v] : payload.items()) {
    auto it = spec->payload.find(field);
    if (it == spec->payload.end()) {
      throw Error(ErrorCode::kSchemaViolation, "event '" + e.event_type + "' has no payload field '" + field + "'");
    }
    try {
      e.payload[field] = it->second.from_json(v);
    } catch (const Error& err) {
      throw Error(ErrorCode::kSchemaViolation, err.what());
    }
  }
  interpreter_->emit_event(e);
  return {{"device", e.source}, {"event", e.event_type}};
}

// ---------------------------------------------------------------------------
// Programs

nlohmann::json Service::list_programs() {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& doc : store_->list()) {
    nlohmann::json j{{"program_id", doc.program_id},
                     {"name", doc.name},
                     {"complete", doc.complete()},
                     {"source", doc.source}};
    j["status"] = doc.complete() && interpreter_->installed(doc.program_id)
                      ? engine::to_string(interpreter_->snapshot(doc.program_id).status)
                      : std::string_view("stopped");
    out.push_back(std::move(j));
  }
  return out;
}

nlohmann::json Service::get_program(const std::string& id) {
  const auto* doc = store_->find(id);
  if (!doc) throw Error(ErrorCode::kUnknownProgram, "no program '" + id + "'");
  nlohmann::json j{{"document", to_json(*doc)}};
  if (doc->ast) {
    const auto sentence = lang::render(*doc->ast, editing_grammar());
    nlohmann::json tokens = nlohmann::json::array();
    for (const auto& t : sentence.tokens) tokens.push_back(lang::to_json(t));
    j["tokens"] = tokens;
    j["text"] = sentence.text();
    j["validation"] = lang::to_json(lang::validate(*doc->ast, registry_->view(), store_->program_names()));
    if (interpreter_->installed(id)) j["snapshot"] = engine::to_json(interpreter_->snapshot(id));
  }
  return j;
}

nlohmann::json Service::save_program(const nlohmann::json& p) {
  std::string id = p.value("program_id", std::string());
  const StoredProgram* prev = id.empty() ? nullptr : store_->find(id);
  const auto names = store_->program_names();
  const auto& view = registry_->view();
  const auto known = lang::Grammar::derive_known(view, names, prev ? name_bindings(*prev) : lang::NameBindings{});

  std::string text;
  if (p.contains("text")) {
    text = need_string(p, "text");
  } else if (p.contains("draft")) {
    for (const auto& w : string_list(p.at("draft"))) text += (text.empty() ? "" : " ") + w;
  } else {
    throw Error(ErrorCode::kMalformedDocument, "save needs 'text' or 'draft'");
  }
  auto outcome = lang::parse_prefix(text, known, id);
  if (!outcome.valid_prefix()) throw lang::SyntaxError(outcome.error_position, outcome.expected, outcome.found);

  StoredProgram doc;
  if (outcome.program) {
    doc.name = outcome.program->name;
  } else if (outcome.tokens.tokens.size() >= 2) {
    doc.name = outcome.tokens.tokens[1].text;
  }
  if (id.empty()) id = store_->fresh_id(doc.name.empty() ? "draft" : doc.name);
  doc.program_id = id;

  nlohmann::json validation;
  if (outcome.program) {
    auto program = std::move(*outcome.program);
    program.program_id = id;
    const auto report = lang::validate(program, view, names);
    validation = lang::to_json(report);
    if (!report.ok()) {
      const auto& first = report.errors.front();
      throw DetailedError(ErrorCode::kValidationFailed,
                          "at " + path_to_string(first.path) + ": " + first.message, validation);
    }
    doc.source = lang::render_text(program, known);
    for (const auto& ref : lang::device_references(program)) {
      if (const auto* d = view.find(ref.device_id)) {
        doc.bindings[ref.device_id] = {ref.device_id, d->display_name, d->kind};
      } else if (prev && prev->bindings.contains(ref.device_id)) {
        doc.bindings[ref.device_id] = prev->bindings.at(ref.device_id);
      } else if (const auto* t = known.device_by_id(ref.device_id)) {
        doc.bindings[ref.device_id] = *t;
      }
    }
    lang::for_each_statement(program, [&](const lang::Statement& s, const AstPath&) {
      std::string target;
      if (const auto* st = std::get_if<lang::StartProgram>(&s)) target = st->program_id;
      if (const auto* sp = std::get_if<lang::StopProgram>(&s)) target = sp->program_id;
      if (target.empty()) return;
      if (target == id) {
        doc.programs[target] = doc.name;
      } else if (const auto* other = store_->find(target)) {
        doc.programs[target] = other->name;
      } else if (prev && prev->programs.contains(target)) {
        doc.programs[target] = prev->programs.at(target);
      }
    });
    doc.ast = std::move(program);
  } else {
    doc.source = outcome.tokens.text();
    if (prev) {
      doc.bindings = prev->bindings;
      doc.programs = prev->programs;
    }
  }

  if (!doc.complete() && interpreter_->installed(id) && interpreter_->snapshot(id).running()) {
    throw Error(ErrorCode::kAlreadyRunning, "stop '" + id + "' before saving it as a draft");
  }
  const bool changed = store_->save(doc);
  if (changed) {
    if (doc.ast) {
      interpreter_->install(*doc.ast);
    } else if (interpreter_->installed(id)) {
      interpreter_->uninstall(id);
    }
  }
  nlohmann::json out{{"program_id", id}, {"saved", changed}, {"complete", doc.complete()}, {"document", to_json(doc)}};
  if (!validation.is_null()) out["validation"] = validation;
  return out;
}

nlohmann::json Service::check_program(const nlohmann::json& p) {
  const auto text = need_string(p, "text");
  const auto id = p.value("program_id", std::string());
  const auto* prev = id.empty() ? nullptr : store_->find(id);
  const auto names = store_->program_names();
  const auto known =
      lang::Grammar::derive_known(registry_->view(), names, prev ? name_bindings(*prev) : lang::NameBindings{});
  const auto outcome = lang::parse_prefix(text, known, id);
  nlohmann::json expected = nlohmann::json::array();
  for (const auto& t : outcome.expected) expected.push_back(lang::to_json(t));
  nlohmann::json out{{"expected", expected}};
  switch (outcome.status) {
    case lang::ParseOutcome::Status::kComplete:
      out["status"] = "complete";
      out["validation"] = lang::to_json(lang::validate(*outcome.program, registry_->view(), names));
      out["ast"] = lang::to_json(*outcome.program);
      break;
    case lang::ParseOutcome::Status::kIncomplete: out["status"] = "incomplete"; break;
    case lang::ParseOutcome::Status::kError:
      out["status"] = "error";
      out["position"] = outcome.error_position;
      out["found"] = outcome.found;
      break;
  }
  return out;
}

nlohmann::json Service::start_program(const std::string& id) {
  const auto* doc = store_->find(id);
  if (!doc) throw Error(ErrorCode::kUnknownProgram, "no program '" + id + "'");
  if (!doc->ast) throw Error(ErrorCode::kValidationFailed, "'" + id + "' is an unfinished draft");
  const auto report = lang::validate(*doc->ast, registry_->view(), store_->program_names());
  if (!report.ok()) {
    throw DetailedError(ErrorCode::kValidationFailed, report.errors.front().message, lang::to_json(report));
  }
  return engine::to_json(interpreter_->start(id));
}

// ---------------------------------------------------------------------------
// Smart keyboard

nlohmann::json Service::keyboard(const std::string& verb, const nlohmann::json& p) {
  const auto& g = editing_grammar();
  keyboard::Draft draft;
  if (p.contains("draft")) {
    draft.tokens = string_list(p.at("draft"));
  } else if (p.contains("text")) {
    draft = keyboard::draft_from_text(need_string(p, "text"), g);
  }
  if (verb == "keyboard.inspect") return keyboard::to_json(keyboard::inspect(draft, g));
  const auto point = p.contains("point") ? lang::insertion_point_from_json(p.at("point"))
                                         : keyboard::inspect(draft, g).next;
  if (verb == "keyboard.options") {
    nlohmann::json options = nlohmann::json::array();
    for (const auto& o : keyboard::options(draft, point, g, registry_->view())) options.push_back(keyboard::to_json(o));
    return {{"view", keyboard::to_json(keyboard::inspect(draft, g))}, {"options", options}};
  }
  if (verb == "keyboard.apply") {
    const auto option = keyboard::option_from_json(p.at("option"));
    std::optional<std::string> value;
    if (p.contains("value")) value = need_string(p, "value");
    return keyboard::to_json(keyboard::apply_option(draft, point, option, g, value));
  }
  if (verb == "keyboard.delete") return keyboard::to_json(keyboard::delete_at(draft, point, g));
  throw Error(ErrorCode::kMalformedDocument, "unknown verb '" + verb + "'");
}

// ---------------------------------------------------------------------------
// Traces and analysis

nlohmann::json Service::traces(const nlohmann::json& p, bool redacted) {
  const auto q = query_from_json(p);
  const auto result = redacted ? log_->redacted_view(q, policy_from_json(p.value("policy", p))) : log_->query(q);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : result.entries) entries.push_back(trace::to_json(e));
  return {{"entries", entries}, {"next_cursor", result.next_cursor}};
}

std::string Service::export_traces(const nlohmann::json& query, bool redacted) {
  const auto q = query_from_json(query);
  const auto result =
      redacted ? log_->redacted_view(q, policy_from_json(query.value("policy", query))) : log_->query(q);
  std::string out;
  for (const auto& e : result.entries) out += trace::to_json(e).dump() + "\n";
  return out;
}

nlohmann::json Service::depgraph(const nlohmann::json& p) {
  std::vector<lang::Program> programs;
  for (const auto& doc : store_->list()) {
    if (doc.ast) programs.push_back(*doc.ast);
  }
  auto graph = deps::extract(programs, registry_->view());
  if (p.value("annotated", false)) graph = deps::annotate(std::move(graph), interpreter_->snapshots());
  if (p.value("format", std::string("json")) == "dot") return {{"dot", deps::to_dot(graph)}};
  return deps::to_json(graph);
}

// ---------------------------------------------------------------------------
// Clock and scenario

nlohmann::json Service::clock_state() {
  const auto& c = interpreter_->clock();
  nlohmann::json j{{"now", c.now()},
                   {"mode", engine::to_string(c.mode())},
                   {"factor", c.factor()},
                   {"pending_timers", c.size()}};
  if (auto next = c.next_due()) j["next_due"] = *next;
  if (driver_until_) j["until"] = *driver_until_;
  return j;
}

nlohmann::json Service::clock_set(const nlohmann::json& p) {
  auto& c = interpreter_->clock();
  if (p.contains("mode")) c.set_mode(engine::clock_mode_from_string(need_string(p, "mode")));
  if (p.contains("factor")) {
    if (!p.at("factor").is_number()) throw Error(ErrorCode::kMalformedDocument, "factor must be a number");
    c.set_factor(p.at("factor").get<double>());
  }
  if (c.mode() == engine::ClockMode::kRealtime) c.set_factor(1.0);
  if (p.contains("until")) {
    if (p.at("until").is_null()) {
      driver_until_.reset();
    } else {
      driver_until_ = integer_field(p, "until");
    }
  }
  reset_driver_base();
  return clock_state();
}

nlohmann::json Service::clock_advance(const nlohmann::json& p) {
  SimTime to = interpreter_->now();
  if (p.contains("to")) {
    to = integer_field(p, "to");
  } else if (p.contains("by")) {
    to += integer_field(p, "by");
  } else {
    throw Error(ErrorCode::kMalformedDocument, "advance needs 'to' or 'by'");
  }
  interpreter_->advance_clock(to);
  return clock_state();
}

void Service::load_scenario(Scenario sc) {
  interpreter_->clock().cancel_owner(kScenarioOwner);
  scenario_ = std::move(sc);
  scenario_base_ = interpreter_->now();
  scenario_log_.clear();
  for (std::size_t i = 0; i < scenario_->steps.size(); ++i) {
    const auto& step = scenario_->steps[i];
    interpreter_->schedule(scenario_base_ + step.at, std::string(kScenarioOwner),
                           "line " + std::to_string(step.line) + " " + std::string(to_string(step.kind)), [this, i] {
                             const auto& s = scenario_->steps[i];
                             auto entry = gateway::to_json(s);
                             try {
                               apply_step(s, *interpreter_);
                               entry["ok"] = true;
                             } catch (const Error& e) {
                               spdlog::warn("scenario line {}: {}", s.line, e.what());
                               entry["ok"] = false;
                               entry["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
                             }
                             scenario_log_.push_back(std::move(entry));
                           });
  }
}

nlohmann::json Service::scenario_state() {
  if (!scenario_) return {{"loaded", false}};
  std::size_t pending = 0;
  std::optional<SimTime> next;
  for (const auto& t : interpreter_->clock().pending()) {
    if (t.owner != kScenarioOwner) continue;
    ++pending;
    if (!next || t.due < *next) next = t.due;
  }
  nlohmann::json j{{"loaded", true},
                   {"name", scenario_->name},
                   {"base", scenario_base_},
                   {"steps", scenario_->steps.size()},
                   {"pending", pending},
                   {"applied", scenario_log_}};
  if (next) j["next_due"] = *next;
  return j;
}

nlohmann::json Service::scenario_load(const nlohmann::json& p) {
  if (p.contains("text")) {
    load_scenario(parse_scenario(need_string(p, "text"), registry_->catalog()));
  } else {
    load_scenario(gateway::load_scenario(need_string(p, "path"), registry_->catalog()));
  }
  return scenario_state();
}

nlohmann::json Service::scenario_step() {
  std::optional<SimTime> next;
  for (const auto& t : interpreter_->clock().pending()) {
    if (t.owner == kScenarioOwner && (!next || t.due < *next)) next = t.due;
  }
  if (next) interpreter_->advance_clock(*next);
  auto j = scenario_state();
  j["done"] = !next.has_value();
  return j;
}

}  // namespace tapkit::gateway
