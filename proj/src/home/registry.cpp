#include "tapkit/home/registry.hpp"

#include <algorithm>

namespace tapkit::home {

namespace {

bool is_word(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

}  // namespace

std::string_view to_string(Availability a) {
  return a == Availability::kAvailable ? "available" : "missing";
}

std::string_view to_string(RegistryDelta::Kind kind) {
  switch (kind) {
    case RegistryDelta::Kind::kRegistered: return "registered";
    case RegistryDelta::Kind::kReappeared: return "reappeared";
    case RegistryDelta::Kind::kUnregistered: return "unregistered";
    case RegistryDelta::Kind::kCriticalChanged: return "critical-changed";
    case RegistryDelta::Kind::kNoOp: return "no-op";
  }
  return "?";
}

const DeviceDescriptor* RegistrySnapshot::find(std::string_view id) const {
  auto it = devices.find(std::string(id));
  return it == devices.end() ? nullptr : &it->second;
}

const DeviceKind* RegistrySnapshot::kind_of(std::string_view id) const {
  const auto* d = find(id);
  return d ? catalog->find(d->kind) : nullptr;
}

std::vector<const DeviceDescriptor*> RegistrySnapshot::available() const {
  std::vector<const DeviceDescriptor*> out;
  for (const auto& [_, d] : devices) {
    if (d.available()) out.push_back(&d);
  }
  return out;
}

Registry::Registry(std::shared_ptr<const KindCatalog> catalog, trace::TraceSink* sink) : sink_(sink) {
  data_.catalog = std::move(catalog);
}

const DeviceKind& Registry::kind_for(const DeviceDescriptor& d) const {
  const auto* kind = data_.catalog->find(d.kind);
  if (!kind) throw Error(ErrorCode::kUnknownKind, "unknown kind '" + d.kind + "'");
  return *kind;
}

void Registry::record(trace::Category category, const std::string& subject, nlohmann::json details,
                      const std::string& cause) {
  if (!sink_) return;
  trace::TraceEntry e;
  e.at = now_;
  e.category = category;
  e.subject = subject;
  e.details = std::move(details);
  e.cause = cause;
  sink_->record(std::move(e));
}

RegistryDelta Registry::bump(RegistryDelta::Kind kind, const std::string& id) {
  ++data_.generation;
  return RegistryDelta{kind, id, data_.generation};
}

void Registry::set_now(SimTime t) {
  if (t < now_) {
    throw Error(ErrorCode::kTimeReversal,
                "registry time cannot move back from " + std::to_string(now_) + " to " + std::to_string(t));
  }
  now_ = t;
}

DeviceState Registry::make_state(const DeviceKind& kind, const std::map<std::string, Value>& values) const {
  for (const auto& [var, _] : values) {
    if (!kind.variable(var)) {
      throw Error(ErrorCode::kUnknownVariable, "kind '" + kind.name + "' has no variable '" + var + "'");
    }
  }
  DeviceState state;
  for (const auto& spec : kind.variables) {
    auto it = values.find(spec.name);
    Value v = it == values.end() ? spec.initial : it->second;
    if (!spec.domain.contains(v)) {
      throw Error(ErrorCode::kDomainViolation, "value " + debug_string(v) + " for '" + spec.name +
                                                   "' is outside " + spec.domain.describe());
    }
    state.values.emplace(spec.name, StateSlot{std::move(v), now_});
  }
  return state;
}

RegistryDelta Registry::register_device(DeviceDescriptor descriptor,
                                        const std::map<std::string, Value>& initial_state,
                                        const std::string& cause) {
  const auto& kind = kind_for(descriptor);
  if (auto it = data_.devices.find(descriptor.id); it != data_.devices.end()) {
    auto& existing = it->second;
    if (existing.available()) {
      throw Error(ErrorCode::kDuplicateDevice, "device '" + descriptor.id + "' is already registered");
    }
    if (existing.kind != descriptor.kind) {
      throw Error(ErrorCode::kKindMismatch, "device '" + descriptor.id + "' reappeared as kind '" +
                                                descriptor.kind + "' but was '" + existing.kind + "'");
    }
    existing.availability = Availability::kAvailable;
    auto delta = bump(RegistryDelta::Kind::kReappeared, descriptor.id);
    record(trace::Category::kRegistryChange, descriptor.id,
           {{"change", "reappeared"}, {"kind", existing.kind}, {"generation", delta.generation}}, cause);
    for (const auto& o : observers_) o(delta);
    return delta;
  }

  if (!is_word(descriptor.id)) throw Error(ErrorCode::kSchemaViolation, "device ids must be single words");
  if (!is_word(descriptor.display_name)) {
    throw Error(ErrorCode::kSchemaViolation, "display names must be single words: '" + descriptor.display_name + "'");
  }
  if (!descriptor.location.empty() && !is_word(descriptor.location)) {
    throw Error(ErrorCode::kSchemaViolation, "locations must be single words");
  }
  for (const auto& [label, value] : descriptor.properties) {
    if (!is_word(label) || !is_word(value) || label == "location") {
      throw Error(ErrorCode::kSchemaViolation, "bad property '" + label + "=" + value + "'");
    }
  }
  for (const auto& [_, d] : data_.devices) {
    if (d.display_name == descriptor.display_name) {
      throw Error(ErrorCode::kDuplicateName, "display name '" + descriptor.display_name + "' is taken by '" + d.id + "'");
    }
  }
  auto state = make_state(kind, initial_state);
  descriptor.availability = Availability::kAvailable;
  const auto id = descriptor.id;
  nlohmann::json details{{"change", "registered"},
                         {"kind", descriptor.kind},
                         {"name", descriptor.display_name},
                         {"location", descriptor.location},
                         {"critical", descriptor.critical}};
  data_.states.emplace(id, std::move(state));
  data_.devices.emplace(id, std::move(descriptor));
  auto delta = bump(RegistryDelta::Kind::kRegistered, id);
  details["generation"] = delta.generation;
  record(trace::Category::kRegistryChange, id, std::move(details), cause);
  for (const auto& o : observers_) o(delta);
  return delta;
}

RegistryDelta Registry::unregister_device(const std::string& id, const std::string& cause) {
  auto it = data_.devices.find(id);
  if (it == data_.devices.end()) throw Error(ErrorCode::kUnknownDevice, "unknown device '" + id + "'");
  if (!it->second.available()) return RegistryDelta{RegistryDelta::Kind::kNoOp, id, data_.generation};
  it->second.availability = Availability::kMissing;
  auto delta = bump(RegistryDelta::Kind::kUnregistered, id);
  record(trace::Category::kRegistryChange, id, {{"change", "unregistered"}, {"generation", delta.generation}}, cause);
  for (const auto& o : observers_) o(delta);
  return delta;
}

RegistryDelta Registry::set_critical(const std::string& id, bool critical, const std::string& cause) {
  auto it = data_.devices.find(id);
  if (it == data_.devices.end()) throw Error(ErrorCode::kUnknownDevice, "unknown device '" + id + "'");
  if (it->second.critical == critical) return RegistryDelta{RegistryDelta::Kind::kNoOp, id, data_.generation};
  it->second.critical = critical;
  auto delta = bump(RegistryDelta::Kind::kCriticalChanged, id);
  record(trace::Category::kRegistryChange, id,
         {{"change", "critical"}, {"critical", critical}, {"generation", delta.generation}}, cause);
  for (const auto& o : observers_) o(delta);
  return delta;
}

ActionOutcome Registry::apply_action(const std::string& id, const std::string& action,
                                     const std::vector<Value>& args, const std::string& cause,
                                     const nlohmann::json& context) {
  auto it = data_.devices.find(id);
  if (it == data_.devices.end()) throw Error(ErrorCode::kUnknownDevice, "unknown device '" + id + "'");
  const auto& desc = it->second;
  if (!desc.available()) throw Error(ErrorCode::kMissingDevice, "device '" + id + "' is missing");
  const auto& kind = kind_for(desc);
  const auto* spec = kind.action(action);
  if (!spec) {
    throw Error(ErrorCode::kUnsupportedAction, "kind '" + kind.name + "' has no action '" + action + "'");
  }
  if (args.size() != spec->params.size()) {
    throw Error(ErrorCode::kDomainViolation, "action '" + action + "' takes " +
                                                 std::to_string(spec->params.size()) + " argument(s)");
  }
  nlohmann::json arg_json = nlohmann::json::array();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!spec->params[i].domain.contains(args[i])) {
      throw Error(ErrorCode::kDomainViolation, "argument '" + spec->params[i].name + "' is outside " +
                                                   spec->params[i].domain.describe());
    }
    arg_json.push_back(spec->params[i].domain.format(args[i]));
  }
  if (desc.critical && spec->power_removing) {
    nlohmann::json details{{"action", action}, {"args", arg_json}, {"reason", "critical-device"}};
    details.update(context);
    record(trace::Category::kDenial, id, std::move(details), cause);
    throw Error(ErrorCode::kCriticalDeviceDenied,
                "'" + action + "' would remove power from critical device '" + id + "'");
  }

  auto& state = data_.states.at(id);
  ActionOutcome outcome;
  for (const auto& [var, src] : spec->effect) {
    Value v;
    if (src.is_reference()) {
      const auto& ref = std::get<std::string>(src.source);
      for (std::size_t i = 0; i < spec->params.size(); ++i) {
        if (spec->params[i].name == ref) v = args[i];
      }
    } else {
      v = std::get<Value>(src.source);
    }
    if (state.values.at(var).value != v) outcome.changed.emplace(var, std::move(v));
  }

  nlohmann::json details{{"action", action}, {"args", arg_json}};
  details.update(context);
  record(trace::Category::kAction, id, std::move(details), cause);

  for (const auto& [var, v] : outcome.changed) {
    auto& slot = state.values.at(var);
    const auto& dom = kind.variable(var)->domain;
    record(trace::Category::kStateChange, id,
           {{"variable", var}, {"from", dom.format(slot.value)}, {"to", dom.format(v)}}, cause);
    slot = StateSlot{v, now_};
  }

  for (const auto& [name, ev] : kind.events) {
    if (!ev.when) continue;
    auto changed = outcome.changed.find(ev.when->variable);
    if (changed == outcome.changed.end()) continue;
    if (ev.when->becomes && *ev.when->becomes != changed->second) continue;
    HomeEvent e;
    e.source = id;
    e.event_type = name;
    e.at = now_;
    e.cause = cause;
    for (const auto& [field, _] : ev.payload) e.payload.emplace(field, state.values.at(field).value);
    outcome.events.push_back(e);
    emit_event(std::move(e));
  }
  return outcome;
}

StateReading Registry::read_state(const std::string& id, const std::string& variable) const {
  const auto* desc = data_.find(id);
  if (!desc) throw Error(ErrorCode::kUnknownDevice, "unknown device '" + id + "'");
  const auto& state = data_.states.at(id);
  auto it = state.values.find(variable);
  if (it == state.values.end()) {
    throw Error(ErrorCode::kUnknownVariable, "kind '" + desc->kind + "' has no variable '" + variable + "'");
  }
  return StateReading{it->second.value, !desc->available(), it->second.updated_at};
}

void Registry::validate_event(const HomeEvent& event, const DeviceKind& kind) const {
  const auto* spec = kind.event(event.event_type);
  if (!spec) {
    throw Error(ErrorCode::kSchemaViolation, "kind '" + kind.name + "' has no event '" + event.event_type + "'");
  }
  for (const auto& [field, value] : event.payload) {
    auto it = spec->payload.find(field);
    if (it == spec->payload.end()) {
      throw Error(ErrorCode::kSchemaViolation, "event '" + event.event_type + "' has no payload field '" + field + "'");
    }
    if (!it->second.contains(value)) {
      throw Error(ErrorCode::kSchemaViolation, "payload field '" + field + "' is outside " + it->second.describe());
    }
  }
  for (const auto& [field, _] : spec->payload) {
    if (!event.payload.contains(field)) {
      throw Error(ErrorCode::kSchemaViolation, "event '" + event.event_type + "' lacks payload field '" + field + "'");
    }
  }
}

void Registry::emit_event(HomeEvent event) {
  const auto* desc = data_.find(event.source);
  if (!desc) throw Error(ErrorCode::kUnknownDevice, "unknown event source '" + event.source + "'");
  const auto& kind = kind_for(*desc);
  validate_event(event, kind);
  event.at = now_;
  event.from_missing = !desc->available();
  if (event.cause.empty()) event.cause = std::string(trace::cause::kScenario);

  const auto* spec = kind.event(event.event_type);
  nlohmann::json payload = nlohmann::json::object();
  for (const auto& [field, value] : event.payload) payload[field] = spec->payload.at(field).format(value);
  nlohmann::json details{{"event", event.event_type}, {"payload", payload}};
  if (event.from_missing) details["missing"] = true;
  record(trace::Category::kDeviceEvent, event.source, std::move(details), event.cause);
  inbound_.push_back(std::move(event));
}

HomeEvent Registry::pop_event() {
  HomeEvent e = std::move(inbound_.front());
  inbound_.pop_front();
  return e;
}

std::map<std::string, Value> Registry::apply_event_effects(const HomeEvent& event) {
  std::map<std::string, Value> changed;
  const auto* desc = data_.find(event.source);
  if (!desc || !desc->available()) return changed;
  const auto& kind = kind_for(*desc);
  const auto* spec = kind.event(event.event_type);
  if (!spec) return changed;
  auto& state = data_.states.at(event.source);
  for (const auto& [var, src] : spec->sets) {
    Value v = src.is_reference() ? event.payload.at(std::get<std::string>(src.source)) : std::get<Value>(src.source);
    auto& slot = state.values.at(var);
    if (slot.value == v) continue;
    const auto& dom = kind.variable(var)->domain;
    record(trace::Category::kStateChange, event.source,
           {{"variable", var}, {"from", dom.format(slot.value)}, {"to", dom.format(v)}, {"event", event.event_type}},
           event.cause);
    slot = StateSlot{v, now_};
    changed.emplace(var, std::move(v));
  }
  return changed;
}

nlohmann::json to_json(const DeviceDescriptor& d) {
  return {{"id", d.id},
          {"kind", d.kind},
          {"name", d.display_name},
          {"location", d.location},
          {"properties", d.properties},
          {"critical", d.critical},
          {"availability", to_string(d.availability)}};
}

DeviceDescriptor descriptor_from_json(const nlohmann::json& j) {
  DeviceDescriptor d;
  d.id = j.at("id").get<std::string>();
  d.kind = j.at("kind").get<std::string>();
  d.display_name = j.value("name", d.id);
  d.location = j.value("location", std::string{});
  d.properties = j.value("properties", std::map<std::string, std::string>{});
  d.critical = j.value("critical", false);
  return d;
}

nlohmann::json state_to_json(const DeviceState& s, const DeviceKind& kind) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [var, slot] : s.values) {
    j[var] = {{"value", kind.variable(var)->domain.to_plain_json(slot.value)}, {"updated_at", slot.updated_at}};
  }
  return j;
}

}  // namespace tapkit::home
