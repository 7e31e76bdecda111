#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/common.hpp"
#include "tapkit/home/value.hpp"

namespace tapkit::lang {

using home::Value;

struct ById {
  std::string id;
  bool operator==(const ById&) const = default;
};

struct AllOfKind {
  std::string kind;
  bool operator==(const AllOfKind&) const = default;
};

/// Plural selector narrowed by one descriptor property. The pseudo-property
/// "location" filters on the room.
struct Filtered {
  std::string kind;
  std::string property;
  std::string value;
  bool operator==(const Filtered&) const = default;
};

inline constexpr std::string_view kLocationProperty = "location";

using EntitySelector = std::variant<ById, AllOfKind, Filtered>;

bool is_plural(const EntitySelector& s);
/// Kind named by a plural selector; empty for ById.
std::string selector_kind(const EntitySelector& s);

struct ActionStmt {
  std::string action;
  EntitySelector target;
  std::vector<Value> args;
  bool operator==(const ActionStmt&) const = default;
};

struct StartProgram {
  std::string program_id;
  bool operator==(const StartProgram&) const = default;
};

struct StopProgram {
  std::string program_id;
  bool operator==(const StopProgram&) const = default;
};

struct Wait {
  SimTime duration_ms = 0;
  bool operator==(const Wait&) const = default;
};

using Statement = std::variant<ActionStmt, StartProgram, StopProgram, Wait>;

struct EventTrigger {
  EntitySelector source;
  std::string event;
  std::optional<Value> key_value;
  bool operator==(const EventTrigger&) const = default;
};

enum class Comparator { kEq, kNe, kLt, kLe, kGt, kGe };
enum class Quantifier { kAll, kAny };

std::string_view to_string(Comparator c);
std::string_view to_string(Quantifier q);

struct Atom {
  Quantifier quantifier = Quantifier::kAll;  // meaningful for plural selectors only
  EntitySelector selector;
  std::string variable;
  Comparator comparator = Comparator::kEq;
  Value literal;
  bool operator==(const Atom&) const = default;
};

struct StateExpr {
  enum class Op { kAtom, kNot, kAnd, kOr };

  Op op = Op::kAtom;
  Atom atom;                       // when op == kAtom
  std::vector<StateExpr> operands;  // 1 for kNot, 2 for kAnd/kOr

  static StateExpr leaf(Atom a);
  static StateExpr negate(StateExpr e);
  static StateExpr both(StateExpr l, StateExpr r);
  static StateExpr either(StateExpr l, StateExpr r);

  bool operator==(const StateExpr&) const = default;
};

struct StateTrigger {
  StateExpr condition;
  bool operator==(const StateTrigger&) const = default;
};

using Trigger = std::variant<EventTrigger, StateTrigger>;

struct Rule {
  int index = 0;
  Trigger trigger;
  std::vector<Statement> body;
  bool operator==(const Rule&) const = default;
};

/// A stored automation: an imperative prologue followed by rules.
///
/// AST paths index children as follows. Program: 0 header, 1 imperative
/// list, 2 rule list. Rule: 0 trigger, 1 body list. Action: 0 action,
/// 1 selector, 2+k argument k. Start/Stop: 1 program reference. Wait:
/// 1 amount, 2 unit. EventTrigger: 0 selector, 1 event, 2 key value.
/// StateTrigger: 0 condition. Not: 0 operand; And/Or: 0 and 1. Atom:
/// 0 selector, 1 variable, 2 comparator, 3 literal. Plural selector:
/// 0 kind, 1 filter property, 2 filter value.
struct Program {
  std::string program_id;
  std::string name;
  std::vector<Statement> imperative;
  std::vector<Rule> rules;

  bool operator==(const Program&) const = default;
};

inline constexpr int kHeaderChild = 0;
inline constexpr int kImperativeChild = 1;
inline constexpr int kRulesChild = 2;

AstPath imperative_path(int index);
AstPath rule_path(int index);
AstPath body_path(int rule, int index);

/// Visits every statement with its AST path, imperative section first.
template <typename F>
void for_each_statement(const Program& p, F&& f) {
  for (int i = 0; i < static_cast<int>(p.imperative.size()); ++i) f(p.imperative[i], imperative_path(i));
  for (int r = 0; r < static_cast<int>(p.rules.size()); ++r) {
    for (int i = 0; i < static_cast<int>(p.rules[r].body.size()); ++i) f(p.rules[r].body[i], body_path(r, i));
  }
}

/// Visits every atom of a condition with its path.
template <typename F>
void for_each_atom(const StateExpr& e, const AstPath& path, F&& f) {
  if (e.op == StateExpr::Op::kAtom) {
    f(e.atom, path);
    return;
  }
  for (int i = 0; i < static_cast<int>(e.operands.size()); ++i) {
    auto child = path;
    child.push_back(i);
    for_each_atom(e.operands[i], child, f);
  }
}

/// Depth of a program's tree, counting program -> section -> rule ->
/// trigger/statement -> ... (used to bound generators).
int ast_depth(const Program& p);

nlohmann::json to_json(const EntitySelector& s);
EntitySelector selector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Statement& s);
Statement statement_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StateExpr& e);
StateExpr state_expr_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Program& p);
Program program_from_json(const nlohmann::json& j);

}  // namespace tapkit::lang
