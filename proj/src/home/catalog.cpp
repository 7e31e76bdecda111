#include "tapkit/home/catalog.hpp"

#include <fstream>
#include <set>

#include "tapkit/common.hpp"

namespace tapkit::home {

extern const char* const kBuiltinCatalogJson;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kMalformedCatalog, where + ": " + what);
}

bool is_word(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

bool is_phrase(std::string_view s) {
  if (s.empty() || s.front() == ' ' || s.back() == ' ') return false;
  return s.find("  ") == std::string_view::npos;
}

EffectSource parse_effect(const nlohmann::json& j, const Domain& target, const std::string& where) {
  if (j.is_string() && !j.get<std::string>().empty() && j.get<std::string>()[0] == '$') {
    return EffectSource{j.get<std::string>().substr(1)};
  }
  try {
    return EffectSource{target.from_json(j)};
  } catch (const Error& e) {
    bad(where, e.what());
  }
}

std::map<std::string, EffectSource> parse_effects(const nlohmann::json& j, const DeviceKind& kind,
                                                  const std::map<std::string, Domain>& refs,
                                                  const std::string& where) {
  std::map<std::string, EffectSource> out;
  for (const auto& [var, src] : j.items()) {
    const auto* spec = kind.variable(var);
    if (!spec) bad(where, "effect writes undeclared variable '" + var + "'");
    auto effect = parse_effect(src, spec->domain, where);
    if (effect.is_reference()) {
      const auto& ref = std::get<std::string>(effect.source);
      auto it = refs.find(ref);
      if (it == refs.end()) bad(where, "effect references unknown field '$" + ref + "'");
      if (it->second.type != spec->domain.type) {
        bad(where, "field '$" + ref + "' does not match the domain of '" + var + "'");
      }
    }
    out.emplace(var, std::move(effect));
  }
  return out;
}

}  // namespace

const VariableSpec* DeviceKind::variable(std::string_view var) const {
  for (const auto& v : variables) {
    if (v.name == var) return &v;
  }
  return nullptr;
}

const EventSpec* DeviceKind::event(std::string_view ev) const {
  auto it = events.find(std::string(ev));
  return it == events.end() ? nullptr : &it->second;
}

const ActionSpec* DeviceKind::action(std::string_view act) const {
  auto it = actions.find(std::string(act));
  return it == actions.end() ? nullptr : &it->second;
}

const EventSpec* DeviceKind::event_by_phrase(std::string_view phrase) const {
  for (const auto& [_, e] : events) {
    if (e.phrase == phrase) return &e;
  }
  return nullptr;
}

KindCatalog KindCatalog::from_json(const nlohmann::json& root) {
  KindCatalog catalog;
  try {
    for (const auto& [kind_name, jk] : root.at("kinds").items()) {
      const std::string where = "kind '" + kind_name + "'";
      if (!is_word(kind_name)) bad(where, "kind names must be single words");
      DeviceKind kind;
      kind.name = kind_name;

      for (const auto& jv : jk.value("variables", nlohmann::json::array())) {
        VariableSpec v;
        v.name = jv.at("name").get<std::string>();
        if (!is_word(v.name)) bad(where, "variable names must be single words");
        if (kind.variable(v.name)) bad(where, "duplicate variable '" + v.name + "'");
        v.domain = domain_from_json(jv.at("domain"));
        v.initial = jv.contains("initial") ? v.domain.from_json(jv.at("initial")) : v.domain.default_value();
        kind.variables.push_back(std::move(v));
      }

      const auto events = jk.value("events", nlohmann::json::object());
      for (const auto& [ev_name, je] : events.items()) {
        const std::string ew = where + " event '" + ev_name + "'";
        EventSpec e;
        e.name = ev_name;
        e.phrase = je.at("phrase").get<std::string>();
        if (!is_phrase(e.phrase)) bad(ew, "bad phrase");
        const auto payload = je.value("payload", nlohmann::json::object());
        for (const auto& [field, jd] : payload.items()) {
          e.payload.emplace(field, domain_from_json(jd));
        }
        if (je.contains("key")) {
          const auto& jkey = je.at("key");
          EventKey key{jkey.at("field").get<std::string>(), jkey.value("phrase", std::string{}),
                       jkey.value("required", false)};
          if (!e.payload.contains(key.field)) bad(ew, "key field is not in the payload schema");
          if (!key.phrase.empty() && !is_phrase(key.phrase)) bad(ew, "bad key phrase");
          e.key = std::move(key);
        }
        e.sets = parse_effects(je.value("sets", nlohmann::json::object()), kind, e.payload, ew);
        if (je.contains("when")) {
          const auto& jw = je.at("when");
          EventCondition cond{jw.at("variable").get<std::string>(), std::nullopt};
          const auto* var = kind.variable(cond.variable);
          if (!var) bad(ew, "'when' names undeclared variable '" + cond.variable + "'");
          if (jw.contains("becomes")) cond.becomes = var->domain.from_json(jw.at("becomes"));
          for (const auto& [field, dom] : e.payload) {
            const auto* fv = kind.variable(field);
            if (!fv || fv->domain != dom) {
              bad(ew, "payload of a state-change event must mirror declared variables");
            }
          }
          e.when = std::move(cond);
        }
        e.time_of_day_schedule = je.value("schedule", std::string{}) == "time-of-day";
        if (e.time_of_day_schedule &&
            (!e.key || e.payload.at(e.key->field).type != DomainType::kTimeOfDay)) {
          bad(ew, "time-of-day scheduled events need a time key field");
        }
        if (kind.event_by_phrase(e.phrase)) bad(ew, "duplicate event phrase in kind");
        kind.events.emplace(ev_name, std::move(e));
      }

      const auto actions = jk.value("actions", nlohmann::json::object());
      for (const auto& [act_name, ja] : actions.items()) {
        const std::string aw = where + " action '" + act_name + "'";
        ActionSpec a;
        a.name = act_name;
        a.phrase = ja.at("phrase").get<std::string>();
        if (!is_phrase(a.phrase)) bad(aw, "bad phrase");
        std::map<std::string, Domain> params;
        for (const auto& jp : ja.value("params", nlohmann::json::array())) {
          ParamSpec p{jp.at("name").get<std::string>(), jp.at("phrase").get<std::string>(),
                      domain_from_json(jp.at("domain"))};
          if (!is_phrase(p.phrase)) bad(aw, "parameters need a non-empty phrase");
          if (!params.emplace(p.name, p.domain).second) bad(aw, "duplicate parameter");
          a.params.push_back(std::move(p));
        }
        a.effect = parse_effects(ja.value("effect", nlohmann::json::object()), kind, params, aw);
        a.power_removing = ja.value("power_removing", false);
        kind.actions.emplace(act_name, std::move(a));
      }
      catalog.kinds_.emplace(kind_name, std::move(kind));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedCatalog, e.what());
  }

  for (const auto& [_, kind] : catalog.kinds_) {
    for (const auto& [name, action] : kind.actions) {
      auto [it, fresh] = catalog.action_phrases_.emplace(name, action.phrase);
      if (!fresh && it->second != action.phrase) {
        bad("action '" + name + "'", "phrase differs between kinds");
      }
      auto [pit, pfresh] = catalog.phrase_actions_.emplace(action.phrase, name);
      if (!pfresh && pit->second != name) {
        bad("action '" + name + "'", "phrase '" + action.phrase + "' is already used by '" + pit->second + "'");
      }
    }
  }
  return catalog;
}

KindCatalog KindCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMalformedCatalog, "cannot read catalog " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedCatalog, path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::shared_ptr<const KindCatalog> KindCatalog::builtin() {
  static const auto catalog =
      std::make_shared<const KindCatalog>(from_json(nlohmann::json::parse(kBuiltinCatalogJson)));
  return catalog;
}

const DeviceKind* KindCatalog::find(std::string_view kind) const {
  auto it = kinds_.find(kind);
  return it == kinds_.end() ? nullptr : &it->second;
}

const std::string* KindCatalog::action_phrase(std::string_view action) const {
  auto it = action_phrases_.find(action);
  return it == action_phrases_.end() ? nullptr : &it->second;
}

const std::string* KindCatalog::action_by_phrase(std::string_view phrase) const {
  auto it = phrase_actions_.find(phrase);
  return it == phrase_actions_.end() ? nullptr : &it->second;
}

nlohmann::json KindCatalog::to_json() const {
  auto effect_json = [](const std::map<std::string, EffectSource>& effects) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [var, src] : effects) {
      if (src.is_reference()) j[var] = "$" + std::get<std::string>(src.source);
      else j[var] = debug_string(std::get<Value>(src.source));
    }
    return j;
  };
  nlohmann::json kinds = nlohmann::json::object();
  for (const auto& [name, kind] : kinds_) {
    nlohmann::json jk;
    jk["variables"] = nlohmann::json::array();
    for (const auto& v : kind.variables) {
      jk["variables"].push_back(
          {{"name", v.name}, {"domain", home::to_json(v.domain)}, {"initial", v.domain.to_plain_json(v.initial)}});
    }
    jk["events"] = nlohmann::json::object();
    for (const auto& [en, e] : kind.events) {
      nlohmann::json je{{"phrase", e.phrase}};
      nlohmann::json payload = nlohmann::json::object();
      for (const auto& [f, d] : e.payload) payload[f] = home::to_json(d);
      je["payload"] = payload;
      if (e.key) je["key"] = {{"field", e.key->field}, {"phrase", e.key->phrase}, {"required", e.key->required}};
      if (!e.sets.empty()) je["sets"] = effect_json(e.sets);
      if (e.time_of_day_schedule) je["schedule"] = "time-of-day";
      jk["events"][en] = je;
    }
    jk["actions"] = nlohmann::json::object();
    for (const auto& [an, a] : kind.actions) {
      nlohmann::json ja{{"phrase", a.phrase}, {"effect", effect_json(a.effect)}, {"power_removing", a.power_removing}};
      ja["params"] = nlohmann::json::array();
      for (const auto& p : a.params) {
        ja["params"].push_back({{"name", p.name}, {"phrase", p.phrase}, {"domain", home::to_json(p.domain)}});
      }
      jk["actions"][an] = ja;
    }
    kinds[name] = jk;
  }
  return {{"kinds", kinds}};
}

}  // namespace tapkit::home
