#include "tapkit/engine/interpreter.hpp"

#include <algorithm>

#include "tapkit/lang/validate.hpp"

namespace tapkit::engine {

namespace {

using lang::StateExpr;

AstPath child(AstPath p, int i) {
  p.push_back(i);
  return p;
}

bool compare(const home::Value& state, lang::Comparator c, const home::Value& literal) {
  const auto ord = home::compare_values(state, literal);
  switch (c) {
    case lang::Comparator::kEq: return ord == std::partial_ordering::equivalent;
    case lang::Comparator::kNe: return ord != std::partial_ordering::equivalent;
    case lang::Comparator::kLt: return ord == std::partial_ordering::less;
    case lang::Comparator::kLe: return ord == std::partial_ordering::less || ord == std::partial_ordering::equivalent;
    case lang::Comparator::kGt: return ord == std::partial_ordering::greater;
    case lang::Comparator::kGe:
      return ord == std::partial_ordering::greater || ord == std::partial_ordering::equivalent;
  }
  return false;
}

nlohmann::json paths_json(const std::set<AstPath>& paths) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : paths) out.push_back(path_to_string(p));
  return out;
}

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::kStopped: return "stopped";
    case Status::kRunning: return "running";
    case Status::kDegraded: return "degraded";
  }
  return "stopped";
}

nlohmann::json to_json(const InstanceSnapshot& s) {
  nlohmann::json statements = nlohmann::json::object();
  for (const auto& [p, n] : s.statement_counters) statements[path_to_string(p)] = n;
  nlohmann::json rules = nlohmann::json::object();
  for (const auto& [r, n] : s.rule_counters) rules[std::to_string(r)] = n;
  return {{"program_id", s.program_id},
          {"name", s.name},
          {"status", to_string(s.status)},
          {"statement_counters", statements},
          {"rule_counters", rules},
          {"waiting", s.waiting},
          {"unknown_refs", paths_json(s.unknown_refs)},
          {"start_order", s.start_order},
          {"at", s.at},
          {"registry_generation", s.registry_generation}};
}

Interpreter::Interpreter(home::Registry& registry, trace::TraceSink* sink) : registry_(registry), sink_(sink) {
  clock_.set_now(registry_.now());
  registry_.subscribe([this](const home::RegistryDelta&) {
    refresh_unknown_refs();
    refresh_strikes();
  });
}

// ---------------------------------------------------------------------------
// Program table

void Interpreter::install(lang::Program program) {
  const auto id = program.program_id;
  if (id.empty()) throw Error(ErrorCode::kValidationFailed, "a program needs an id");
  programs_[id] = program;
  auto& inst = instances_[id];
  if (inst.status == Status::kStopped) inst.program = std::make_shared<const lang::Program>(std::move(program));
}

void Interpreter::uninstall(const std::string& program_id, const std::string& cause) {
  auto it = instances_.find(program_id);
  if (it == instances_.end()) return;
  if (it->second.status != Status::kStopped) {
    stop_instance(program_id, cause, {{"reason", "removed"}});
    process();
  }
  instances_.erase(program_id);
  programs_.erase(program_id);
}

bool Interpreter::installed(const std::string& program_id) const { return programs_.contains(program_id); }

std::vector<std::string> Interpreter::installed_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : programs_) out.push_back(id);
  return out;
}

Interpreter::Instance& Interpreter::instance(const std::string& id) {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw Error(ErrorCode::kUnknownProgram, "no program '" + id + "'");
  return it->second;
}

const Interpreter::Instance& Interpreter::instance(const std::string& id) const {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw Error(ErrorCode::kUnknownProgram, "no program '" + id + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Lifecycle

InstanceSnapshot Interpreter::start(const std::string& program_id, const std::string& cause) {
  if (!installed(program_id)) throw Error(ErrorCode::kUnknownProgram, "no program '" + program_id + "'");
  if (instance(program_id).status != Status::kStopped) {
    throw Error(ErrorCode::kAlreadyRunning, "program '" + program_id + "' is already running");
  }
  sync_registry_clock();
  start_instance(program_id, cause, nullptr);
  process();
  return snapshot(program_id);
}

InstanceSnapshot Interpreter::stop(const std::string& program_id, const std::string& cause) {
  if (instance(program_id).status == Status::kStopped) {
    throw Error(ErrorCode::kNotRunning, "program '" + program_id + "' is not running");
  }
  sync_registry_clock();
  stop_instance(program_id, cause, nlohmann::json::object());
  process();
  return snapshot(program_id);
}

std::set<AstPath> Interpreter::unresolved(const lang::Program& p) const {
  std::set<AstPath> out;
  for (const auto& ref : lang::device_references(p)) {
    const auto* d = registry_.view().find(ref.device_id);
    if (!d || !d->available()) out.insert(ref.path);
  }
  return out;
}

void Interpreter::start_instance(const std::string& id, const std::string& cause, const nlohmann::json& via) {
  auto& inst = instance(id);
  inst.program = std::make_shared<const lang::Program>(programs_.at(id));
  const auto& p = *inst.program;
  inst.statement_counters.clear();
  lang::for_each_statement(p, [&](const lang::Statement&, const AstPath& path) { inst.statement_counters[path] = 0; });
  inst.rule_counters.clear();
  for (int j = 0; j < static_cast<int>(p.rules.size()); ++j) inst.rule_counters[j] = 0;
  inst.rules.assign(p.rules.size(), RuleState{});
  inst.epoch += 1;
  inst.start_order = next_start_order_++;
  inst.armed = false;
  inst.unknown_refs = unresolved(p);
  inst.status = inst.unknown_refs.empty() ? Status::kRunning : Status::kDegraded;

  nlohmann::json details{{"event", "started"},
                         {"name", p.name},
                         {"status", to_string(inst.status)},
                         {"unknown_refs", paths_json(inst.unknown_refs)}};
  if (!via.is_null()) details["stmt"] = via;
  trace(trace::Category::kProgramLifecycle, id, std::move(details), cause);
  run_list(id, inst.epoch, -1, 0);
}

void Interpreter::stop_instance(const std::string& id, const std::string& cause, const nlohmann::json& details) {
  auto& inst = instance(id);
  const auto from = inst.status;
  inst.status = Status::kStopped;
  inst.armed = false;
  inst.epoch += 1;
  clock_.cancel_owner(id);
  nlohmann::json d{{"event", "stopped"}, {"from", to_string(from)}};
  d.update(details);
  trace(trace::Category::kProgramLifecycle, id, std::move(d), cause);
  refresh_strikes();
}

void Interpreter::arm(const std::string& id) {
  auto& inst = instance(id);
  const auto& p = *inst.program;
  if (p.rules.empty()) {
    stop_instance(id, trace::cause::program(id), {{"reason", "completed"}});
    return;
  }
  inst.armed = true;
  for (std::size_t j = 0; j < p.rules.size(); ++j) {
    if (const auto* st = std::get_if<lang::StateTrigger>(&p.rules[j].trigger)) {
      inst.rules[j].last = evaluate(st->condition);
    }
  }
  refresh_strikes();
}

// ---------------------------------------------------------------------------
// Statement execution

void Interpreter::run_list(const std::string& id, std::uint64_t epoch, int rule, std::size_t from) {
  auto it = instances_.find(id);
  if (it == instances_.end() || it->second.epoch != epoch || it->second.status == Status::kStopped) return;
  // Keep the text alive even if a statement restarts this program.
  const auto program = it->second.program;
  const auto& list = rule < 0 ? program->imperative : program->rules[static_cast<std::size_t>(rule)].body;
  for (std::size_t i = from; i < list.size(); ++i) {
    it = instances_.find(id);
    if (it == instances_.end() || it->second.epoch != epoch || it->second.status == Status::kStopped) return;
    const auto path = rule < 0 ? lang::imperative_path(static_cast<int>(i))
                               : lang::body_path(rule, static_cast<int>(i));
    bool suspend = false;
    run_statement(id, it->second, list[i], path, rule, i, suspend);
    if (suspend) return;
  }
  if (rule >= 0) return;
  it = instances_.find(id);
  if (it != instances_.end() && it->second.epoch == epoch && it->second.status != Status::kStopped) arm(id);
}

void Interpreter::run_statement(const std::string& id, Instance& inst, const lang::Statement& s, const AstPath& path,
                                int rule, std::size_t index, bool& suspend) {
  const auto exec = ++inst.statement_counters[path];
  const nlohmann::json stmt{{"program", id}, {"path", path_to_string(path)}, {"exec", exec}};
  const auto cause = trace::cause::program(id);

  if (const auto* a = std::get_if<lang::ActionStmt>(&s)) {
    std::vector<std::string> targets;
    if (const auto* b = std::get_if<lang::ById>(&a->target)) {
      const auto* d = registry_.view().find(b->id);
      if (!d || !d->available()) {
        trace(trace::Category::kDegradedSkip, id,
              {{"stmt", stmt}, {"action", a->action}, {"device", b->id}, {"reason", d ? "missing" : "unknown"}},
              cause);
        inst.unknown_refs.insert(child(path, 1));
        update_status(id, inst);
        return;
      }
      targets.push_back(b->id);
    } else {
      targets = lang::resolve_selector(a->target, registry_.view());
    }
    if (targets.empty()) {
      trace(trace::Category::kAction, id, {{"stmt", stmt}, {"action", a->action}, {"targets", 0}}, cause);
      return;
    }
    const nlohmann::json context{{"stmt", stmt}};
    for (const auto& t : targets) {
      try {
        registry_.apply_action(t, a->action, a->args, cause, context);
      } catch (const Error& e) {
        // Critical-device refusals are traced by the registry itself.
        if (e.code() == ErrorCode::kCriticalDeviceDenied) continue;
        trace(trace::Category::kDenial, t,
              {{"stmt", stmt}, {"action", a->action}, {"reason", to_string(e.code())}, {"message", e.what()}}, cause);
      }
    }
    return;
  }

  if (const auto* st = std::get_if<lang::StartProgram>(&s)) {
    const auto& target = st->program_id;
    if (!installed(target)) {
      trace(trace::Category::kProgramLifecycle, id,
            {{"event", "start-failed"}, {"target", target}, {"reason", "unknown-program"}, {"stmt", stmt}}, cause);
    } else if (instance(target).status != Status::kStopped) {
      trace(trace::Category::kProgramLifecycle, target,
            {{"event", "start-failed"}, {"reason", "already-running"}, {"stmt", stmt}}, cause);
    } else {
      start_instance(target, cause, stmt);
    }
    return;
  }

  if (const auto* sp = std::get_if<lang::StopProgram>(&s)) {
    const auto& target = sp->program_id;
    if (target == id) {
      stop_instance(id, cause, {{"stmt", stmt}});
      suspend = true;
    } else if (!installed(target) || instance(target).status == Status::kStopped) {
      trace(trace::Category::kProgramLifecycle, target,
            {{"event", "stop-ignored"}, {"reason", installed(target) ? "not-running" : "unknown-program"},
             {"stmt", stmt}},
            cause);
    } else {
      stop_instance(target, cause, {{"stmt", stmt}});
    }
    return;
  }

  const auto& w = std::get<lang::Wait>(s);
  const auto until = clock_.now() + w.duration_ms;
  trace(trace::Category::kProgramLifecycle, id,
        {{"event", "waiting"}, {"duration_ms", w.duration_ms}, {"until", until}, {"stmt", stmt}}, cause);
  const auto epoch = inst.epoch;
  schedule(until, id, "resume " + path_to_string(path),
           [this, id, epoch, rule, index] { run_list(id, epoch, rule, index + 1); });
  suspend = true;
}

// ---------------------------------------------------------------------------
// Conditions and firings

bool Interpreter::evaluate_atom(const lang::Atom& a) const {
  const auto& view = registry_.view();
  std::vector<std::string> targets;
  if (const auto* b = std::get_if<lang::ById>(&a.selector)) {
    const auto* d = view.find(b->id);
    if (d && d->available()) targets.push_back(b->id);
  } else {
    targets = lang::resolve_selector(a.selector, view);
  }
  if (targets.empty()) return false;
  auto holds = [&](const std::string& t) {
    const auto& values = view.states.at(t).values;
    auto it = values.find(a.variable);
    return it != values.end() && compare(it->second.value, a.comparator, a.literal);
  };
  if (lang::is_plural(a.selector) && a.quantifier == lang::Quantifier::kAny) {
    return std::any_of(targets.begin(), targets.end(), holds);
  }
  return std::all_of(targets.begin(), targets.end(), holds);
}

bool Interpreter::evaluate(const StateExpr& e) const {
  switch (e.op) {
    case StateExpr::Op::kAtom: return evaluate_atom(e.atom);
    case StateExpr::Op::kNot: return !evaluate(e.operands.at(0));
    case StateExpr::Op::kAnd: return evaluate(e.operands.at(0)) && evaluate(e.operands.at(1));
    case StateExpr::Op::kOr: return evaluate(e.operands.at(0)) || evaluate(e.operands.at(1));
  }
  return false;
}

std::vector<std::pair<std::uint64_t, std::string>> Interpreter::by_start_order() const {
  std::vector<std::pair<std::uint64_t, std::string>> out;
  for (const auto& [id, inst] : instances_) {
    if (inst.status != Status::kStopped && inst.armed) out.emplace_back(inst.start_order, id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Firing> Interpreter::rising_edges() {
  std::vector<Firing> out;
  for (const auto& [order, id] : by_start_order()) {
    auto& inst = instances_.at(id);
    const auto& rules = inst.program->rules;
    for (std::size_t j = 0; j < rules.size(); ++j) {
      const auto* st = std::get_if<lang::StateTrigger>(&rules[j].trigger);
      if (!st) continue;
      const bool now_true = evaluate(st->condition);
      if (now_true && !inst.rules[j].last) {
        out.push_back(Firing{id, order, static_cast<int>(j), clock_.now(), std::nullopt, inst.epoch});
      }
      inst.rules[j].last = now_true;
    }
  }
  return out;
}

std::vector<Firing> Interpreter::dispatch(const home::HomeEvent& event) {
  registry_.apply_event_effects(event);
  std::vector<Firing> out;
  const auto& view = registry_.view();
  const auto* source = view.find(event.source);
  const auto* kind = view.kind_of(event.source);
  const auto* spec = kind ? kind->event(event.event_type) : nullptr;
  if (source && source->available() && spec) {
    for (const auto& [order, id] : by_start_order()) {
      const auto& inst = instances_.at(id);
      const auto& rules = inst.program->rules;
      for (std::size_t j = 0; j < rules.size(); ++j) {
        const auto* et = std::get_if<lang::EventTrigger>(&rules[j].trigger);
        if (!et || et->event != event.event_type || !lang::selector_matches(et->source, *source)) continue;
        if (et->key_value) {
          if (!spec->key) continue;
          auto it = event.payload.find(spec->key->field);
          if (it == event.payload.end() || it->second != *et->key_value) continue;
        }
        out.push_back(Firing{id, order, static_cast<int>(j), clock_.now(), event, inst.epoch});
      }
    }
  }
  auto edges = rising_edges();
  out.insert(out.end(), edges.begin(), edges.end());
  std::stable_sort(out.begin(), out.end(), [](const Firing& a, const Firing& b) {
    return std::tie(a.start_order, a.rule) < std::tie(b.start_order, b.rule);
  });
  return out;
}

void Interpreter::execute_firing(const Firing& f) {
  auto it = instances_.find(f.program_id);
  if (it == instances_.end() || it->second.epoch != f.epoch || it->second.status == Status::kStopped) return;
  if (clock_.now() != cascade_at_) {
    cascade_at_ = clock_.now();
    cascade_count_ = 0;
    cascade_reported_ = false;
  }
  if (++cascade_count_ > kCascadeLimit) {
    if (!cascade_reported_) {
      trace(trace::Category::kDenial, f.program_id,
            {{"reason", "cascade-limit"}, {"limit", kCascadeLimit}, {"rule", f.rule}},
            std::string(trace::cause::kSystem));
      cascade_reported_ = true;
    }
    return;
  }
  auto& inst = it->second;
  const auto count = ++inst.rule_counters[f.rule];
  nlohmann::json details{{"rule", f.rule}, {"count", count}};
  if (f.event) {
    details["trigger"] = {{"event", f.event->event_type}, {"source", f.event->source}};
  } else {
    details["trigger"] = {{"edge", true}};
  }
  trace(trace::Category::kRuleFired, f.program_id, std::move(details), trace::cause::program(f.program_id));
  run_list(f.program_id, f.epoch, f.rule, 0);
}

void Interpreter::execute_all(std::vector<Firing> firings) {
  for (const auto& f : firings) execute_firing(f);
}

void Interpreter::process() {
  sync_registry_clock();
  while (true) {
    if (registry_.has_pending_events()) {
      const auto e = registry_.pop_event();
      execute_all(dispatch(e));
      continue;
    }
    auto edges = rising_edges();
    if (edges.empty()) break;
    execute_all(std::move(edges));
  }
}

// ---------------------------------------------------------------------------
// Time

void Interpreter::advance_clock(SimTime to) {
  if (clock_.mode() != ClockMode::kSimulated) {
    throw Error(ErrorCode::kWrongClockMode, "advance needs the simulated clock mode, not " +
                                                std::string(to_string(clock_.mode())));
  }
  advance_to(to);
}

void Interpreter::advance_to(SimTime to) {
  if (to < clock_.now()) {
    throw Error(ErrorCode::kTimeReversal, "cannot advance from " + std::to_string(clock_.now()) + " back to " +
                                              std::to_string(to));
  }
  while (clock_.fire_next(to)) process();
  clock_.set_now(to);
  sync_registry_clock();
}

std::uint64_t Interpreter::schedule(SimTime due, std::string owner, std::string purpose, std::function<void()> fire) {
  return clock_.schedule(due, std::move(owner), std::move(purpose), [this, fire = std::move(fire)] {
    sync_registry_clock();
    fire();
  });
}

void Interpreter::refresh_strikes() {
  std::set<StrikeKey> needed;
  const auto& view = registry_.view();
  for (const auto& [id, inst] : instances_) {
    if (inst.status == Status::kStopped || !inst.armed) continue;
    for (const auto& r : inst.program->rules) {
      const auto* et = std::get_if<lang::EventTrigger>(&r.trigger);
      if (!et || !et->key_value) continue;
      const auto* t = std::get_if<home::TimeOfDay>(&*et->key_value);
      if (!t) continue;
      std::string kind = lang::selector_kind(et->source);
      if (const auto* b = std::get_if<lang::ById>(&et->source)) {
        const auto* d = view.find(b->id);
        if (!d) continue;
        kind = d->kind;
      }
      const auto* k = view.catalog->find(kind);
      const auto* ev = k ? k->event(et->event) : nullptr;
      if (ev && ev->time_of_day_schedule) needed.insert({kind, et->event, t->minutes});
    }
  }
  for (auto it = strike_timers_.begin(); it != strike_timers_.end();) {
    if (needed.contains(it->first)) {
      ++it;
    } else {
      clock_.cancel(it->second);
      it = strike_timers_.erase(it);
    }
  }
  for (const auto& key : needed) {
    if (strike_timers_.contains(key)) continue;
    const auto& [kind, event, minutes] = key;
    const auto due = next_time_of_day(clock_.now(), minutes);
    strike_timers_[key] = schedule(due, "clock", kind + " " + event + " " + home::format_time({minutes}),
                                   [this, key] { strike(key); });
  }
}

void Interpreter::strike(const StrikeKey& key) {
  strike_timers_.erase(key);
  const auto& [kind_name, event, minutes] = key;
  const auto* kind = registry_.catalog().find(kind_name);
  const auto* spec = kind ? kind->event(event) : nullptr;
  if (spec && spec->key) {
    std::vector<std::string> sources;
    for (const auto* d : registry_.view().available()) {
      if (d->kind == kind_name) sources.push_back(d->id);
    }
    for (const auto& src : sources) {
      home::HomeEvent e;
      e.source = src;
      e.event_type = event;
      for (const auto& [field, dom] : spec->payload) e.payload.emplace(field, dom.default_value());
      e.payload[spec->key->field] = home::TimeOfDay{minutes};
      e.cause = std::string(trace::cause::kSystem);
      registry_.emit_event(std::move(e));
    }
  }
  refresh_strikes();
}

// ---------------------------------------------------------------------------
// Registry

void Interpreter::refresh_unknown_refs() {
  for (auto& [id, inst] : instances_) {
    if (inst.status == Status::kStopped) continue;
    auto now_unresolved = unresolved(*inst.program);
    if (now_unresolved == inst.unknown_refs) continue;
    inst.unknown_refs = std::move(now_unresolved);
    update_status(id, inst);
  }
}

void Interpreter::update_status(const std::string& id, Instance& inst) {
  if (inst.status == Status::kStopped) return;
  const auto next = inst.unknown_refs.empty() ? Status::kRunning : Status::kDegraded;
  if (next == inst.status) return;
  const auto from = inst.status;
  inst.status = next;
  trace(trace::Category::kProgramLifecycle, id,
        {{"event", "status"},
         {"from", to_string(from)},
         {"to", to_string(next)},
         {"unknown_refs", paths_json(inst.unknown_refs)}},
        std::string(trace::cause::kSystem));
}

home::RegistryDelta Interpreter::register_device(home::DeviceDescriptor d,
                                                 const std::map<std::string, home::Value>& initial,
                                                 const std::string& cause) {
  sync_registry_clock();
  auto delta = registry_.register_device(std::move(d), initial, cause);
  process();
  return delta;
}

home::RegistryDelta Interpreter::unregister_device(const std::string& id, const std::string& cause) {
  sync_registry_clock();
  auto delta = registry_.unregister_device(id, cause);
  process();
  return delta;
}

home::RegistryDelta Interpreter::set_critical(const std::string& id, bool critical, const std::string& cause) {
  sync_registry_clock();
  auto delta = registry_.set_critical(id, critical, cause);
  process();
  return delta;
}

void Interpreter::emit_event(home::HomeEvent event) {
  sync_registry_clock();
  registry_.emit_event(std::move(event));
  process();
}

home::ActionOutcome Interpreter::device_action(const std::string& id, const std::string& action,
                                               const std::vector<home::Value>& args, const std::string& cause) {
  sync_registry_clock();
  auto outcome = registry_.apply_action(id, action, args, cause);
  process();
  return outcome;
}

// ---------------------------------------------------------------------------
// Snapshots and tracing

InstanceSnapshot Interpreter::snapshot_of(const std::string& id, const Instance& inst) const {
  InstanceSnapshot s;
  s.program_id = id;
  s.name = inst.program ? inst.program->name : std::string();
  s.status = inst.status;
  s.statement_counters = inst.statement_counters;
  s.rule_counters = inst.rule_counters;
  if (inst.program && inst.start_order == 0) {
    lang::for_each_statement(*inst.program, [&](const lang::Statement&, const AstPath& p) {
      s.statement_counters[p] = 0;
    });
    for (int j = 0; j < static_cast<int>(inst.program->rules.size()); ++j) s.rule_counters[j] = 0;
  }
  if (inst.status != Status::kStopped && inst.armed) {
    for (std::size_t j = 0; j < inst.program->rules.size(); ++j) {
      const bool state_rule = std::holds_alternative<lang::StateTrigger>(inst.program->rules[j].trigger);
      if (!state_rule || !inst.rules[j].last) s.waiting.insert(static_cast<int>(j));
    }
  }
  s.unknown_refs = inst.unknown_refs;
  s.start_order = inst.start_order;
  s.at = clock_.now();
  s.registry_generation = registry_.generation();
  return s;
}

InstanceSnapshot Interpreter::snapshot(const std::string& program_id) const {
  return snapshot_of(program_id, instance(program_id));
}

std::vector<InstanceSnapshot> Interpreter::snapshots() const {
  std::vector<InstanceSnapshot> out;
  for (const auto& [id, inst] : instances_) out.push_back(snapshot_of(id, inst));
  return out;
}

std::vector<std::string> Interpreter::running() const {
  std::vector<std::pair<std::uint64_t, std::string>> order;
  for (const auto& [id, inst] : instances_) {
    if (inst.status != Status::kStopped) order.emplace_back(inst.start_order, id);
  }
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (auto& [_, id] : order) out.push_back(std::move(id));
  return out;
}

void Interpreter::trace(trace::Category category, const std::string& subject, nlohmann::json details,
                        const std::string& cause) {
  if (!sink_) return;
  trace::TraceEntry e;
  e.at = clock_.now();
  e.category = category;
  e.subject = subject;
  e.details = std::move(details);
  e.cause = cause;
  sink_->record(std::move(e));
}

void Interpreter::sync_registry_clock() {
  if (registry_.now() < clock_.now()) registry_.set_now(clock_.now());
}

}  // namespace tapkit::engine
