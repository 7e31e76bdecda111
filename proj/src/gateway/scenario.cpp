#include "tapkit/gateway/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace tapkit::gateway {

namespace {

[[noreturn]] void fail(int line, const std::string& message) {
  throw Error(ErrorCode::kMalformedScenario, "line " + std::to_string(line) + ": " + message);
}

std::vector<std::string> words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool is_word(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
}

std::optional<std::int64_t> integer(std::string_view s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::pair<std::string, std::string> key_value(const std::string& w, int line) {
  const auto eq = w.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == w.size()) fail(line, "expected key=value, found '" + w + "'");
  return {w.substr(0, eq), w.substr(eq + 1)};
}

home::Value typed(const home::Domain& d, const std::string& text, const std::string& what, int line) {
  auto v = d.parse(text);
  if (!v) fail(line, what + " '" + text + "' is not in " + d.describe());
  return *v;
}

}  // namespace

std::string_view to_string(ScenarioStep::Kind k) {
  switch (k) {
    case ScenarioStep::Kind::kRegister: return "register";
    case ScenarioStep::Kind::kUnregister: return "unregister";
    case ScenarioStep::Kind::kEmit: return "emit";
    case ScenarioStep::Kind::kSetCritical: return "critical";
    case ScenarioStep::Kind::kMarker: return "mark";
  }
  return "mark";
}

std::optional<SimTime> parse_duration(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.find(':') != std::string_view::npos) {
    std::int64_t parts[3] = {0, 0, 0};
    int n = 0;
    std::size_t start = 0;
    while (n < 3) {
      const auto colon = text.find(':', start);
      const auto piece = text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start);
      auto v = integer(piece);
      if (!v || *v < 0) return std::nullopt;
      parts[n++] = *v;
      if (colon == std::string_view::npos) break;
      start = colon + 1;
    }
    if (n != 3 || parts[1] > 59 || parts[2] > 59) return std::nullopt;
    return (parts[0] * 3600 + parts[1] * 60 + parts[2]) * 1000;
  }
  static const std::pair<std::string_view, SimTime> kUnits[] = {{"ms", 1}, {"min", 60000}, {"h", 3600000}, {"s", 1000}};
  for (const auto& [suffix, scale] : kUnits) {
    if (text.size() > suffix.size() && text.ends_with(suffix)) {
      auto v = integer(text.substr(0, text.size() - suffix.size()));
      if (v && *v >= 0) return *v * scale;
    }
  }
  auto v = integer(text);
  if (!v || *v < 0) return std::nullopt;
  return *v;
}

Scenario parse_scenario(std::string_view text, const home::KindCatalog& catalog) {
  Scenario sc;
  std::map<std::string, std::string> kinds;  // device id -> kind, as registered so far
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto w = words(line);
    if (w.empty()) continue;

    if (w[0] == "scenario") {
      if (w.size() != 2 || !is_word(w[1])) fail(line_no, "expected 'scenario NAME'");
      if (!sc.name.empty()) fail(line_no, "scenario name given twice");
      sc.name = w[1];
      continue;
    }
    if (w[0] != "at") fail(line_no, "expected 'at', 'scenario' or a comment, found '" + w[0] + "'");
    if (w.size() < 3) fail(line_no, "expected 'at TIME VERB ...'");
    auto at = parse_duration(w[1]);
    if (!at) fail(line_no, "bad time '" + w[1] + "'");

    ScenarioStep step;
    step.at = *at;
    step.line = line_no;
    const auto& verb = w[2];
    if (verb == "register") {
      // at T register KIND ID name=N [location=L] [critical] [prop.K=V] [state.VAR=VALUE]
      if (w.size() < 5) fail(line_no, "expected 'register KIND ID name=NAME ...'");
      const auto* kind = catalog.find(w[3]);
      if (!kind) fail(line_no, "unknown kind '" + w[3] + "'");
      if (!is_word(w[4])) fail(line_no, "bad device id '" + w[4] + "'");
      step.kind = ScenarioStep::Kind::kRegister;
      step.device.id = w[4];
      step.device.kind = w[3];
      for (std::size_t i = 5; i < w.size(); ++i) {
        if (w[i] == "critical") {
          step.device.critical = true;
          continue;
        }
        auto [k, v] = key_value(w[i], line_no);
        if (k == "name") {
          step.device.display_name = v;
        } else if (k == "location") {
          step.device.location = v;
        } else if (k.starts_with("prop.")) {
          step.device.properties[k.substr(5)] = v;
        } else if (k.starts_with("state.")) {
          const auto var = k.substr(6);
          const auto* spec = kind->variable(var);
          if (!spec) fail(line_no, "kind '" + kind->name + "' has no variable '" + var + "'");
          step.initial[var] = typed(spec->domain, v, "value", line_no);
        } else {
          fail(line_no, "unknown register field '" + k + "'");
        }
      }
      if (step.device.display_name.empty()) fail(line_no, "register needs name=NAME");
      kinds[step.device.id] = step.device.kind;
    } else if (verb == "unregister") {
      if (w.size() != 4) fail(line_no, "expected 'unregister ID'");
      step.kind = ScenarioStep::Kind::kUnregister;
      step.device_id = w[3];
    } else if (verb == "emit") {
      // at T emit ID EVENT [FIELD=VALUE ...]
      if (w.size() < 5) fail(line_no, "expected 'emit ID EVENT [FIELD=VALUE ...]'");
      step.kind = ScenarioStep::Kind::kEmit;
      step.device_id = w[3];
      step.event = w[4];
      auto known = kinds.find(step.device_id);
      if (known == kinds.end()) fail(line_no, "device '" + step.device_id + "' is not registered earlier in the file");
      const auto* spec = catalog.find(known->second)->event(step.event);
      if (!spec) fail(line_no, "kind '" + known->second + "' has no event '" + step.event + "'");
      for (std::size_t i = 5; i < w.size(); ++i) {
        auto [k, v] = key_value(w[i], line_no);
        auto field = spec->payload.find(k);
        if (field == spec->payload.end()) fail(line_no, "event '" + step.event + "' has no field '" + k + "'");
        step.payload[k] = typed(field->second, v, "field " + k, line_no);
      }
      for (const auto& [field, _] : spec->payload) {
        if (!step.payload.contains(field)) fail(line_no, "event '" + step.event + "' needs " + field + "=VALUE");
      }
    } else if (verb == "critical") {
      if (w.size() != 5 || (w[4] != "on" && w[4] != "off")) fail(line_no, "expected 'critical ID on|off'");
      step.kind = ScenarioStep::Kind::kSetCritical;
      step.device_id = w[3];
      step.critical = w[4] == "on";
    } else if (verb == "mark") {
      if (w.size() < 4) fail(line_no, "expected 'mark LABEL'");
      step.kind = ScenarioStep::Kind::kMarker;
      for (std::size_t i = 3; i < w.size(); ++i) step.label += (i > 3 ? " " : "") + w[i];
    } else {
      fail(line_no, "unknown step '" + verb + "'");
    }
    sc.steps.push_back(std::move(step));
  }
  std::stable_sort(sc.steps.begin(), sc.steps.end(),
                   [](const ScenarioStep& a, const ScenarioStep& b) { return a.at < b.at; });
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path, const home::KindCatalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read scenario " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str(), catalog);
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + e.what());
  }
}

void apply_step(const ScenarioStep& step, engine::Interpreter& interpreter) {
  const auto cause = std::string(trace::cause::kScenario);
  switch (step.kind) {
    case ScenarioStep::Kind::kRegister: interpreter.register_device(step.device, step.initial, cause); return;
    case ScenarioStep::Kind::kUnregister: interpreter.unregister_device(step.device_id, cause); return;
    case ScenarioStep::Kind::kEmit: {
      home::HomeEvent e;
      e.source = step.device_id;
      e.event_type = step.event;
      e.payload = step.payload;
      e.cause = cause;
      interpreter.emit_event(std::move(e));
      return;
    }
    case ScenarioStep::Kind::kSetCritical: interpreter.set_critical(step.device_id, step.critical, cause); return;
    case ScenarioStep::Kind::kMarker: return;
  }
}

nlohmann::json to_json(const ScenarioStep& step) {
  nlohmann::json j{{"at", step.at}, {"kind", to_string(step.kind)}, {"line", step.line}};
  switch (step.kind) {
    case ScenarioStep::Kind::kRegister: j["device"] = home::to_json(step.device); break;
    case ScenarioStep::Kind::kUnregister: j["device"] = step.device_id; break;
    case ScenarioStep::Kind::kEmit: {
      j["device"] = step.device_id;
      j["event"] = step.event;
      nlohmann::json payload = nlohmann::json::object();
      for (const auto& [k, v] : step.payload) payload[k] = home::debug_string(v);
      j["payload"] = payload;
      break;
    }
    case ScenarioStep::Kind::kSetCritical:
      j["device"] = step.device_id;
      j["critical"] = step.critical;
      break;
    case ScenarioStep::Kind::kMarker: j["label"] = step.label; break;
  }
  return j;
}

}  // namespace tapkit::gateway
