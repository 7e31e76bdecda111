#include "tapkit/lang/validate.hpp"

#include <algorithm>
#include <set>

namespace tapkit::lang {

namespace {

AstPath child(AstPath p, int i) {
  p.push_back(i);
  return p;
}

class Checker {
 public:
  Checker(const Program& p, const home::RegistrySnapshot& reg, const std::vector<ProgramName>& programs)
      : p_(p), reg_(reg) {
    for (const auto& pn : programs) program_ids_.insert(pn.id);
  }

  ValidationReport run() {
    if (p_.imperative.empty() && p_.rules.empty()) error({}, "a program needs statements or rules");
    for (int i = 0; i < static_cast<int>(p_.imperative.size()); ++i) statement(p_.imperative[i], imperative_path(i));
    for (int j = 0; j < static_cast<int>(p_.rules.size()); ++j) {
      const auto& r = p_.rules[j];
      const auto path = rule_path(j);
      if (r.index != j) error(path, "rule index " + std::to_string(r.index) + " out of sequence");
      if (r.body.empty()) error(child(path, 1), "a rule needs at least one statement");
      if (const auto* et = std::get_if<EventTrigger>(&r.trigger)) {
        event_trigger(*et, child(path, 0));
      } else {
        condition(std::get<StateTrigger>(r.trigger).condition, child(child(path, 0), 0));
      }
      for (int k = 0; k < static_cast<int>(r.body.size()); ++k) statement(r.body[k], body_path(j, k));
    }
    return std::move(report_);
  }

 private:
  void error(AstPath path, std::string message) { report_.errors.push_back({std::move(path), std::move(message)}); }

  // Resolves a selector's kind, recording bindings and unknown references.
  // Null when the kind cannot be determined.
  const home::DeviceKind* selector(const EntitySelector& s, const AstPath& path) {
    if (const auto* b = std::get_if<ById>(&s)) {
      const auto* d = reg_.find(b->id);
      if (!d) {
        report_.unknown.push_back({path, b->id, {}});
        return nullptr;
      }
      if (d->available()) {
        report_.bindings.push_back({path, b->id});
      } else {
        report_.unknown.push_back({path, b->id, d->display_name});
      }
      return reg_.catalog->find(d->kind);
    }
    const auto kind = selector_kind(s);
    const auto* k = reg_.catalog->find(kind);
    if (!k) error(child(path, 0), "unknown kind '" + kind + "'");
    if (const auto* f = std::get_if<Filtered>(&s)) {
      if (f->property.empty() || f->value.empty()) error(child(path, 1), "empty filter");
    }
    return k;
  }

  void statement(const Statement& s, const AstPath& path) {
    if (const auto* a = std::get_if<ActionStmt>(&s)) {
      const auto* k = selector(a->target, child(path, 1));
      if (!k) return;
      const auto* spec = k->action(a->action);
      if (!spec) {
        error(child(path, 0), "kind '" + k->name + "' has no action '" + a->action + "'");
        return;
      }
      if (a->args.size() != spec->params.size()) {
        error(path, "action '" + a->action + "' takes " + std::to_string(spec->params.size()) + " argument(s)");
        return;
      }
      for (std::size_t i = 0; i < a->args.size(); ++i) {
        if (!spec->params[i].domain.contains(a->args[i])) {
          error(child(path, 2 + static_cast<int>(i)), "argument " + home::debug_string(a->args[i]) + " is outside " +
                                                         spec->params[i].domain.describe());
        }
      }
    } else if (const auto* st = std::get_if<StartProgram>(&s)) {
      if (!p_.program_id.empty() && st->program_id == p_.program_id) {
        error(path, "a program cannot start itself");
      } else if (!program_ids_.contains(st->program_id)) {
        report_.unknown_programs.push_back(child(path, 1));
      }
    } else if (const auto* sp = std::get_if<StopProgram>(&s)) {
      if (sp->program_id != p_.program_id && !program_ids_.contains(sp->program_id)) {
        report_.unknown_programs.push_back(child(path, 1));
      }
    } else if (std::get<Wait>(s).duration_ms <= 0) {
      error(path, "wait must be positive");
    }
  }

  void event_trigger(const EventTrigger& t, const AstPath& path) {
    const auto* k = selector(t.source, child(path, 0));
    if (!k) return;
    const auto* spec = k->event(t.event);
    if (!spec) {
      error(child(path, 1), "kind '" + k->name + "' has no event '" + t.event + "'");
      return;
    }
    if (!spec->key) {
      if (t.key_value) error(child(path, 2), "event '" + t.event + "' takes no key");
      return;
    }
    if (!t.key_value) {
      if (spec->key->required) error(child(path, 2), "event '" + t.event + "' needs a " + spec->key->field);
      return;
    }
    const auto& d = spec->payload.at(spec->key->field);
    if (!d.contains(*t.key_value)) {
      error(child(path, 2), "key " + home::debug_string(*t.key_value) + " is outside " + d.describe());
    }
  }

  void condition(const StateExpr& e, const AstPath& path) {
    switch (e.op) {
      case StateExpr::Op::kAtom: return atom(e.atom, path);
      case StateExpr::Op::kNot:
        if (e.operands.size() != 1) return error(path, "'not' takes one operand");
        return condition(e.operands[0], child(path, 0));
      case StateExpr::Op::kAnd:
      case StateExpr::Op::kOr:
        if (e.operands.size() != 2) return error(path, "binary operator needs two operands");
        condition(e.operands[0], child(path, 0));
        condition(e.operands[1], child(path, 1));
        return;
    }
  }

  void atom(const Atom& a, const AstPath& path) {
    const auto* k = selector(a.selector, child(path, 0));
    if (!k) return;
    const auto* var = k->variable(a.variable);
    if (!var) return error(child(path, 1), "kind '" + k->name + "' has no variable '" + a.variable + "'");
    const auto allowed = comparators_for(var->domain);
    if (std::find(allowed.begin(), allowed.end(), a.comparator) == allowed.end()) {
      error(child(path, 2), "comparator '" + std::string(to_string(a.comparator)) + "' does not apply to " +
                                var->domain.describe());
    }
    if (!var->domain.contains(a.literal)) {
      error(child(path, 3), "literal " + home::debug_string(a.literal) + " is outside " + var->domain.describe());
    }
  }

  const Program& p_;
  const home::RegistrySnapshot& reg_;
  std::set<std::string> program_ids_;
  ValidationReport report_;
};

nlohmann::json path_json(const AstPath& p) { return path_to_string(p); }

}  // namespace

nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json bindings = nlohmann::json::array();
  for (const auto& b : r.bindings) bindings.push_back({{"path", path_json(b.path)}, {"device", b.device_id}});
  nlohmann::json unknown = nlohmann::json::array();
  for (const auto& u : r.unknown) {
    unknown.push_back({{"path", path_json(u.path)}, {"device", u.device_id}, {"last_name", u.last_name}});
  }
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : r.errors) errors.push_back({{"path", path_json(e.path)}, {"message", e.message}});
  nlohmann::json programs = nlohmann::json::array();
  for (const auto& p : r.unknown_programs) programs.push_back(path_json(p));
  return {{"ok", r.ok()},
          {"bindings", bindings},
          {"unknown", unknown},
          {"errors", errors},
          {"unknown_programs", programs}};
}

ValidationReport validate(const Program& program, const home::RegistrySnapshot& registry,
                          const std::vector<ProgramName>& programs) {
  return Checker(program, registry, programs).run();
}

bool selector_matches(const EntitySelector& selector, const home::DeviceDescriptor& device) {
  if (const auto* b = std::get_if<ById>(&selector)) return b->id == device.id;
  if (const auto* k = std::get_if<AllOfKind>(&selector)) return k->kind == device.kind;
  const auto& f = std::get<Filtered>(selector);
  if (f.kind != device.kind) return false;
  if (f.property == kLocationProperty) return device.location == f.value;
  auto it = device.properties.find(f.property);
  return it != device.properties.end() && it->second == f.value;
}

std::vector<std::string> resolve_selector(const EntitySelector& selector, const home::RegistrySnapshot& registry) {
  std::vector<std::string> out;
  for (const auto& [id, d] : registry.devices) {
    if (d.available() && selector_matches(selector, d)) out.push_back(id);
  }
  return out;
}

std::vector<std::string> expand_selector(const EntitySelector& selector, const home::RegistrySnapshot& registry) {
  std::vector<std::string> out;
  for (const auto& [id, d] : registry.devices) {
    if (selector_matches(selector, d)) out.push_back(id);
  }
  return out;
}

std::vector<Binding> device_references(const Program& program) {
  std::vector<Binding> out;
  auto visit = [&](const EntitySelector& s, const AstPath& path) {
    if (const auto* b = std::get_if<ById>(&s)) out.push_back({path, b->id});
  };
  for_each_statement(program, [&](const Statement& s, const AstPath& path) {
    if (const auto* a = std::get_if<ActionStmt>(&s)) visit(a->target, child(path, 1));
  });
  for (int j = 0; j < static_cast<int>(program.rules.size()); ++j) {
    const auto trigger = child(rule_path(j), 0);
    if (const auto* et = std::get_if<EventTrigger>(&program.rules[j].trigger)) {
      visit(et->source, child(trigger, 0));
    } else {
      for_each_atom(std::get<StateTrigger>(program.rules[j].trigger).condition, child(trigger, 0),
                    [&](const Atom& a, const AstPath& path) { visit(a.selector, child(path, 0)); });
    }
  }
  return out;
}

}  // namespace tapkit::lang
