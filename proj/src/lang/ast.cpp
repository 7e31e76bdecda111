#include "tapkit/lang/ast.hpp"

#include <algorithm>

namespace tapkit::lang {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::kMalformedDocument, what);
}

int expr_depth(const StateExpr& e) {
  int d = 0;
  for (const auto& o : e.operands) d = std::max(d, expr_depth(o));
  return d + 1;
}

constexpr std::pair<Comparator, std::string_view> kComparatorNames[] = {
    {Comparator::kEq, "="}, {Comparator::kNe, "!="}, {Comparator::kLt, "<"},
    {Comparator::kLe, "<="}, {Comparator::kGt, ">"}, {Comparator::kGe, ">="},
};

Comparator comparator_from_string(std::string_view s) {
  for (const auto& [c, name] : kComparatorNames) {
    if (name == s) return c;
  }
  malformed("unknown comparator '" + std::string(s) + "'");
}

}  // namespace

bool is_plural(const EntitySelector& s) { return !std::holds_alternative<ById>(s); }

std::string selector_kind(const EntitySelector& s) {
  return std::visit(overloaded{[](const ById&) { return std::string{}; },
                               [](const AllOfKind& k) { return k.kind; },
                               [](const Filtered& f) { return f.kind; }},
                    s);
}

std::string_view to_string(Comparator c) {
  for (const auto& [cc, name] : kComparatorNames) {
    if (cc == c) return name;
  }
  return "?";
}

std::string_view to_string(Quantifier q) { return q == Quantifier::kAll ? "all" : "any"; }

StateExpr StateExpr::leaf(Atom a) {
  StateExpr e;
  e.op = Op::kAtom;
  e.atom = std::move(a);
  return e;
}

StateExpr StateExpr::negate(StateExpr inner) {
  StateExpr e;
  e.op = Op::kNot;
  e.operands.push_back(std::move(inner));
  return e;
}

StateExpr StateExpr::both(StateExpr l, StateExpr r) {
  StateExpr e;
  e.op = Op::kAnd;
  e.operands.push_back(std::move(l));
  e.operands.push_back(std::move(r));
  return e;
}

StateExpr StateExpr::either(StateExpr l, StateExpr r) {
  StateExpr e;
  e.op = Op::kOr;
  e.operands.push_back(std::move(l));
  e.operands.push_back(std::move(r));
  return e;
}

AstPath imperative_path(int index) { return {kImperativeChild, index}; }
AstPath rule_path(int index) { return {kRulesChild, index}; }
AstPath body_path(int rule, int index) { return {kRulesChild, rule, 1, index}; }

int ast_depth(const Program& p) {
  int depth = 1;
  for (const auto& r : p.rules) {
    if (const auto* st = std::get_if<StateTrigger>(&r.trigger)) depth = std::max(depth, expr_depth(st->condition));
  }
  return depth;
}

nlohmann::json to_json(const EntitySelector& s) {
  return std::visit(overloaded{[](const ById& b) -> nlohmann::json { return {{"by_id", b.id}}; },
                               [](const AllOfKind& k) -> nlohmann::json { return {{"all_of_kind", k.kind}}; },
                               [](const Filtered& f) -> nlohmann::json {
                                 return {{"filtered", {{"kind", f.kind}, {"property", f.property}, {"value", f.value}}}};
                               }},
                    s);
}

EntitySelector selector_from_json(const nlohmann::json& j) {
  if (j.contains("by_id")) return ById{j.at("by_id").get<std::string>()};
  if (j.contains("all_of_kind")) return AllOfKind{j.at("all_of_kind").get<std::string>()};
  if (j.contains("filtered")) {
    const auto& f = j.at("filtered");
    return Filtered{f.at("kind").get<std::string>(), f.at("property").get<std::string>(),
                    f.at("value").get<std::string>()};
  }
  malformed("unknown selector " + j.dump());
}

nlohmann::json to_json(const Statement& s) {
  return std::visit(
      overloaded{[](const ActionStmt& a) -> nlohmann::json {
                   nlohmann::json args = nlohmann::json::array();
                   for (const auto& v : a.args) args.push_back(home::tagged_json(v));
                   return {{"action", {{"name", a.action}, {"target", to_json(a.target)}, {"args", args}}}};
                 },
                 [](const StartProgram& p) -> nlohmann::json { return {{"start", p.program_id}}; },
                 [](const StopProgram& p) -> nlohmann::json { return {{"stop", p.program_id}}; },
                 [](const Wait& w) -> nlohmann::json { return {{"wait_ms", w.duration_ms}}; }},
      s);
}

Statement statement_from_json(const nlohmann::json& j) {
  if (j.contains("action")) {
    const auto& a = j.at("action");
    ActionStmt s{a.at("name").get<std::string>(), selector_from_json(a.at("target")), {}};
    for (const auto& v : a.value("args", nlohmann::json::array())) s.args.push_back(home::value_from_tagged_json(v));
    return s;
  }
  if (j.contains("start")) return StartProgram{j.at("start").get<std::string>()};
  if (j.contains("stop")) return StopProgram{j.at("stop").get<std::string>()};
  if (j.contains("wait_ms")) return Wait{j.at("wait_ms").get<SimTime>()};
  malformed("unknown statement " + j.dump());
}

nlohmann::json to_json(const StateExpr& e) {
  switch (e.op) {
    case StateExpr::Op::kAtom:
      return {{"atom",
               {{"quantifier", to_string(e.atom.quantifier)},
                {"selector", to_json(e.atom.selector)},
                {"variable", e.atom.variable},
                {"comparator", to_string(e.atom.comparator)},
                {"literal", home::tagged_json(e.atom.literal)}}}};
    case StateExpr::Op::kNot:
      return {{"not", to_json(e.operands[0])}};
    case StateExpr::Op::kAnd:
      return {{"and", {to_json(e.operands[0]), to_json(e.operands[1])}}};
    case StateExpr::Op::kOr:
      return {{"or", {to_json(e.operands[0]), to_json(e.operands[1])}}};
  }
  return nullptr;
}

StateExpr state_expr_from_json(const nlohmann::json& j) {
  if (j.contains("atom")) {
    const auto& a = j.at("atom");
    Atom atom;
    atom.quantifier = a.at("quantifier").get<std::string>() == "any" ? Quantifier::kAny : Quantifier::kAll;
    atom.selector = selector_from_json(a.at("selector"));
    atom.variable = a.at("variable").get<std::string>();
    atom.comparator = comparator_from_string(a.at("comparator").get<std::string>());
    atom.literal = home::value_from_tagged_json(a.at("literal"));
    return StateExpr::leaf(std::move(atom));
  }
  if (j.contains("not")) return StateExpr::negate(state_expr_from_json(j.at("not")));
  for (const char* op : {"and", "or"}) {
    if (!j.contains(op)) continue;
    const auto& pair = j.at(op);
    if (!pair.is_array() || pair.size() != 2) malformed(std::string(op) + " needs two operands");
    auto l = state_expr_from_json(pair[0]);
    auto r = state_expr_from_json(pair[1]);
    return op[0] == 'a' ? StateExpr::both(std::move(l), std::move(r)) : StateExpr::either(std::move(l), std::move(r));
  }
  malformed("unknown condition " + j.dump());
}

nlohmann::json to_json(const Program& p) {
  nlohmann::json imperative = nlohmann::json::array();
  for (const auto& s : p.imperative) imperative.push_back(to_json(s));
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : p.rules) {
    nlohmann::json jr{{"index", r.index}};
    if (const auto* et = std::get_if<EventTrigger>(&r.trigger)) {
      nlohmann::json jt{{"source", to_json(et->source)}, {"event", et->event}};
      if (et->key_value) jt["key"] = home::tagged_json(*et->key_value);
      jr["each_time"] = jt;
    } else {
      jr["if"] = to_json(std::get<StateTrigger>(r.trigger).condition);
    }
    nlohmann::json body = nlohmann::json::array();
    for (const auto& s : r.body) body.push_back(to_json(s));
    jr["body"] = body;
    rules.push_back(jr);
  }
  return {{"program_id", p.program_id}, {"name", p.name}, {"imperative", imperative}, {"rules", rules}};
}

Program program_from_json(const nlohmann::json& j) {
  try {
    Program p;
    p.program_id = j.value("program_id", std::string{});
    p.name = j.at("name").get<std::string>();
    for (const auto& s : j.value("imperative", nlohmann::json::array())) p.imperative.push_back(statement_from_json(s));
    for (const auto& jr : j.value("rules", nlohmann::json::array())) {
      Rule r;
      r.index = jr.at("index").get<int>();
      if (jr.contains("each_time")) {
        const auto& jt = jr.at("each_time");
        EventTrigger t{selector_from_json(jt.at("source")), jt.at("event").get<std::string>(), std::nullopt};
        if (jt.contains("key")) t.key_value = home::value_from_tagged_json(jt.at("key"));
        r.trigger = std::move(t);
      } else {
        r.trigger = StateTrigger{state_expr_from_json(jr.at("if"))};
      }
      for (const auto& s : jr.value("body", nlohmann::json::array())) r.body.push_back(statement_from_json(s));
      p.rules.push_back(std::move(r));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
}

}  // namespace tapkit::lang
