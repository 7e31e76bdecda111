// Shared helpers for the unit and acceptance tests: random homes, random
// programs, and a brute-force continuation oracle for the keyboard.
#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "tapkit/home/registry.hpp"
#include "tapkit/keyboard/keyboard.hpp"
#include "tapkit/lang/ast.hpp"
#include "tapkit/lang/grammar.hpp"
#include "tapkit/lang/parser.hpp"
#include "tapkit/lang/render.hpp"

namespace tapkit::testing {

using Rng = std::mt19937_64;

inline std::shared_ptr<const home::KindCatalog> catalog() { return home::KindCatalog::builtin(); }

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    auto tmpl = (std::filesystem::temp_directory_path() / "tapkit-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) std::abort();
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline home::DeviceDescriptor device(std::string id, std::string kind, std::string name, std::string location = {}) {
  home::DeviceDescriptor d;
  d.id = std::move(id);
  d.kind = std::move(kind);
  d.display_name = std::move(name);
  d.location = std::move(location);
  return d;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

template <typename T>
T pick(Rng& rng, const std::set<T>& s) {
  return pick(rng, std::vector<T>(s.begin(), s.end()));
}

inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

inline int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline home::Value random_value(Rng& rng, const home::Domain& d) {
  switch (d.type) {
    case home::DomainType::kBoolean: return coin(rng);
    case home::DomainType::kEnum: return pick(rng, d.symbols);
    case home::DomainType::kInteger:
    case home::DomainType::kPercent:
      return std::int64_t{std::uniform_int_distribution<std::int64_t>(d.lo, d.hi)(rng)};
    case home::DomainType::kTimeOfDay: return home::TimeOfDay{uniform(rng, 0, 1439)};
  }
  return false;
}

inline const std::vector<std::string>& locations() {
  static const std::vector<std::string> v{"kitchen", "bedroom", "hall", "study", "garden"};
  return v;
}

/// Registers `count` random devices, then marks `missing` of them Missing.
inline void random_home(Rng& rng, home::Registry& reg, int count, int missing) {
  static const std::vector<std::string> adjectives{"blue", "red", "desk", "tree", "porch", "main", "spare", "tiny"};
  std::vector<std::string> kinds;
  for (const auto& [name, _] : reg.catalog().kinds()) kinds.push_back(name);
  std::set<std::string> names;
  for (int i = 0; i < count; ++i) {
    const auto kind = pick(rng, kinds);
    std::string name;
    do {
      name = pick(rng, adjectives) + "-" + kind + (coin(rng, 0.3) ? std::to_string(uniform(rng, 2, 9)) : "");
    } while (names.contains(name));
    names.insert(name);
    auto d = device("d" + std::to_string(i), kind, name, coin(rng, 0.7) ? pick(rng, locations()) : "");
    if (coin(rng, 0.3)) d.properties["floor"] = coin(rng) ? "ground" : "upper";
    std::map<std::string, home::Value> init;
    for (const auto& v : reg.catalog().find(kind)->variables) {
      if (coin(rng, 0.5)) init[v.name] = random_value(rng, v.domain);
    }
    reg.register_device(std::move(d), init);
  }
  std::vector<std::string> ids;
  for (const auto& [id, _] : reg.view().devices) ids.push_back(id);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (int i = 0; i < missing && i < static_cast<int>(ids.size()); ++i) reg.unregister_device(ids[i]);
}

// ---------------------------------------------------------------------------
// Random programs over what a grammar can name.

class ProgramGen {
 public:
  ProgramGen(Rng& rng, const lang::Grammar& g, std::vector<lang::ProgramName> programs = {})
      : rng_(rng), g_(g), programs_(std::move(programs)) {}

  /// Maximum nesting depth of generated conditions.
  int max_depth = 4;

  lang::Program program(std::string id = "gen") {
    static const std::vector<std::string> names{"Evening", "Morning", "XmasTree", "Guard", "Night-Light", "p_7"};
    lang::Program p;
    p.program_id = std::move(id);
    p.name = pick(rng_, names);
    const int n_imp = uniform(rng_, 0, 3);
    const int n_rules = uniform(rng_, n_imp == 0 ? 1 : 0, 3);
    for (int i = 0; i < n_imp; ++i) p.imperative.push_back(statement());
    for (int r = 0; r < n_rules; ++r) {
      auto rule = this->rule();
      rule.index = r;
      p.rules.push_back(std::move(rule));
    }
    return p;
  }

  lang::Statement statement() {
    std::vector<int> choices{3};  // wait
    if (!action_kinds().empty()) choices.insert(choices.end(), {0, 0, 0, 0});
    if (!programs_.empty()) choices.insert(choices.end(), {1, 2});
    switch (pick(rng_, choices)) {
      case 0: return action();
      case 1: return lang::StartProgram{pick(rng_, programs_).id};
      case 2: return lang::StopProgram{pick(rng_, programs_).id};
      default: {
        static const std::vector<SimTime> units{1, 1000, 60'000, 3'600'000};
        return lang::Wait{uniform(rng_, 1, 90) * pick(rng_, units)};
      }
    }
  }

  lang::Rule rule() {
    lang::Rule r;
    const bool event = !event_kinds().empty() && (condition_kinds().empty() || coin(rng_));
    if (event) {
      r.trigger = event_trigger();
    } else if (!condition_kinds().empty()) {
      r.trigger = lang::StateTrigger{condition(uniform(rng_, 1, max_depth))};
    } else {
      // An empty home has neither; fall back to an imperative-only shape.
      return r;
    }
    const int n = uniform(rng_, 1, 3);
    for (int i = 0; i < n; ++i) r.body.push_back(statement());
    return r;
  }

  lang::EventTrigger event_trigger() {
    lang::EventTrigger t;
    const auto kind = selector_for(event_kinds(), t.source);
    const auto* k = g_.catalog().find(kind);
    std::vector<std::string> events;
    for (const auto& [name, _] : k->events) events.push_back(name);
    t.event = pick(rng_, events);
    const auto& spec = *k->event(t.event);
    if (spec.key && (spec.key->required || coin(rng_))) {
      t.key_value = random_value(rng_, spec.payload.at(spec.key->field));
    }
    return t;
  }

  lang::StateExpr condition(int depth) {
    if (depth <= 1 || coin(rng_, 0.4)) return lang::StateExpr::leaf(atom());
    switch (uniform(rng_, 0, 2)) {
      case 0: return lang::StateExpr::negate(condition(depth - 1));
      case 1: return lang::StateExpr::both(condition(depth - 1), condition(depth - 1));
      default: return lang::StateExpr::either(condition(depth - 1), condition(depth - 1));
    }
  }

  lang::Atom atom() {
    lang::Atom a;
    const auto kind = selector_for(condition_kinds(), a.selector);
    if (lang::is_plural(a.selector) && coin(rng_)) a.quantifier = lang::Quantifier::kAny;
    const auto& var = pick(rng_, g_.catalog().find(kind)->variables);
    a.variable = var.name;
    a.comparator = pick(rng_, lang::comparators_for(var.domain));
    a.literal = random_value(rng_, var.domain);
    return a;
  }

  lang::ActionStmt action() {
    std::vector<std::string> actions;
    for (const auto& kind : action_kinds()) {
      for (const auto& [name, _] : g_.catalog().find(kind)->actions) actions.push_back(name);
    }
    lang::ActionStmt a;
    a.action = pick(rng_, actions);
    std::vector<std::string> fitting;
    for (const auto& kind : action_kinds()) {
      if (g_.catalog().find(kind)->action(a.action)) fitting.push_back(kind);
    }
    const auto kind = selector_for(fitting, a.target);
    for (const auto& p : g_.catalog().find(kind)->action(a.action)->params) a.args.push_back(random_value(rng_, p.domain));
    return a;
  }

 private:
  // Picks a selector over one of `kinds`; returns the kind chosen.
  std::string selector_for(const std::vector<std::string>& kinds, lang::EntitySelector& out) {
    const auto kind = pick(rng_, kinds);
    std::vector<const lang::DeviceTerminal*> devices;
    for (const auto& [_, d] : g_.devices()) {
      if (d.kind == kind) devices.push_back(&d);
    }
    const int choice = uniform(rng_, 0, 3);
    if (choice <= 1 && !devices.empty()) {
      out = lang::ById{pick(rng_, devices)->id};
    } else if (choice == 2 && !g_.locations(kind).empty()) {
      out = lang::Filtered{kind, std::string(lang::kLocationProperty), pick(rng_, g_.locations(kind))};
    } else if (choice == 3 && !g_.properties(kind).empty()) {
      const auto props = g_.properties(kind);
      std::vector<std::string> labels;
      for (const auto& [label, _] : props) labels.push_back(label);
      const auto label = pick(rng_, labels);
      out = lang::Filtered{kind, label, pick(rng_, props.at(label))};
    } else {
      out = lang::AllOfKind{kind};
    }
    return kind;
  }

  template <typename F>
  std::vector<std::string> kinds_where(F&& f) const {
    std::vector<std::string> out;
    for (const auto& k : g_.kinds()) {
      if (const auto* kind = g_.catalog().find(k); kind && f(*kind)) out.push_back(k);
    }
    return out;
  }
  std::vector<std::string> action_kinds() const {
    return kinds_where([](const home::DeviceKind& k) { return !k.actions.empty(); });
  }
  std::vector<std::string> event_kinds() const {
    return kinds_where([](const home::DeviceKind& k) { return !k.events.empty(); });
  }
  std::vector<std::string> condition_kinds() const {
    return kinds_where([](const home::DeviceKind& k) { return !k.variables.empty(); });
  }

  Rng& rng_;
  const lang::Grammar& g_;
  std::vector<lang::ProgramName> programs_;
};

/// Rules that could not be given a trigger (empty homes) are dropped.
inline lang::Program tidy(lang::Program p) {
  std::vector<lang::Rule> kept;
  for (auto& r : p.rules) {
    if (r.body.empty()) continue;
    r.index = static_cast<int>(kept.size());
    kept.push_back(std::move(r));
  }
  p.rules = std::move(kept);
  if (p.imperative.empty() && p.rules.empty()) p.imperative.push_back(lang::Wait{1000});
  return p;
}

// ---------------------------------------------------------------------------
// Brute-force continuation oracle.

/// Every word or phrase that could conceivably follow some draft: built from
/// the catalog, the registry (Missing devices included), the program list
/// and the keyword constants, plus sample literals in and out of range.
inline std::vector<std::string> candidate_universe(const home::RegistrySnapshot& reg,
                                                   const std::vector<lang::ProgramName>& programs) {
  std::set<std::string> u;
  using namespace lang::kw;
  for (auto k : {kProgram, kEachTime, kIf, kDo, kThen, kAll, kAny, kLocatedIn, kWhose, kIs, kNot, kAnd, kOr, kOpen,
                 kClose, kStart, kStop, kWait}) {
    u.insert(std::string(k));
  }
  for (const auto& unit : lang::kWaitUnits) u.insert(std::string(unit.word));
  for (auto c : {lang::Comparator::kEq, lang::Comparator::kNe, lang::Comparator::kLt, lang::Comparator::kLe,
                 lang::Comparator::kGt, lang::Comparator::kGe}) {
    u.insert(std::string(lang::comparator_phrase(c)));
  }
  auto samples = [&](const home::Domain& d) {
    switch (d.type) {
      case home::DomainType::kBoolean:
        u.insert(d.true_label);
        u.insert(d.false_label);
        break;
      case home::DomainType::kEnum:
        for (const auto& s : d.symbols) u.insert(s);
        break;
      case home::DomainType::kInteger:
      case home::DomainType::kPercent:
        for (auto v : {d.lo - 1, d.lo, (d.lo + d.hi) / 2, d.hi, d.hi + 1}) u.insert(std::to_string(v));
        break;
      case home::DomainType::kTimeOfDay:
        for (auto t : {"00:00", "18:00", "23:59", "24:00", "7:5"}) u.insert(t);
        break;
    }
  };
  for (const auto& [kname, kind] : reg.catalog->kinds()) {
    u.insert(kname);
    for (const auto& v : kind.variables) {
      u.insert(v.name);
      samples(v.domain);
    }
    for (const auto& [_, a] : kind.actions) {
      u.insert(a.phrase);
      for (const auto& p : a.params) {
        if (!p.phrase.empty()) u.insert(p.phrase);
        samples(p.domain);
      }
    }
    for (const auto& [_, e] : kind.events) {
      u.insert(e.phrase);
      if (e.key && !e.key->phrase.empty()) u.insert(e.key->phrase);
      for (const auto& [__, d] : e.payload) samples(d);
    }
  }
  for (const auto& [_, d] : reg.devices) {
    u.insert(std::string(lang::kDevicePrefix) + d.display_name);
    if (!d.location.empty()) u.insert(d.location);
    for (const auto& [label, value] : d.properties) {
      u.insert(label);
      u.insert(value);
    }
  }
  for (const auto& l : locations()) u.insert(l);
  for (const auto& p : programs) u.insert(p.name);
  for (auto w : {"0", "1", "7", "1000000000", "1000000001", "Draft", "somewhere", "-"}) u.insert(w);
  return {u.begin(), u.end()};
}

struct OracleResult {
  std::set<std::string> expected;  // universe words the parser accepts next
  std::set<std::string> offered;   // universe words some option stands for
  std::vector<std::string> problems;
};

/// Compares keyboard::options at the frontier with brute force over the
/// candidate universe. Also flags Missing devices, duplicate options, and
/// options that do not re-parse when applied.
inline OracleResult check_completion(const keyboard::Draft& draft, const lang::Grammar& g,
                                     const home::RegistrySnapshot& reg, const std::vector<std::string>& universe) {
  OracleResult r;
  const auto view = keyboard::inspect(draft, g);
  const auto opts = keyboard::options(draft, view.next, g, reg);

  auto probe = draft.tokens;
  probe.emplace_back();
  for (const auto& w : universe) {
    probe.back() = w;
    const auto out = lang::parse_tokens(probe, g);
    // Accepted as exactly one more token: the whole candidate was consumed as a unit.
    if (out.valid_prefix() && out.tokens.tokens.size() == probe.size()) r.expected.insert(w);
  }

  std::set<std::pair<lang::TokenCategory, std::string>> seen;
  for (const auto& o : opts) {
    if (!seen.insert(o.terminal.key()).second) r.problems.push_back("duplicate option " + o.terminal.text);
    if (o.terminal.category == lang::TokenCategory::kDevice) {
      const auto name = o.terminal.text.substr(lang::kDevicePrefix.size());
      for (const auto& [_, d] : reg.devices) {
        if (d.display_name == name && !d.available()) r.problems.push_back("missing device offered: " + name);
      }
    }
    if (o.terminal.is_literal()) {
      for (const auto& w : universe) {
        if (lang::accepts(o.terminal, w)) r.offered.insert(w);
      }
    } else {
      r.offered.insert(o.terminal.text);
    }
    try {
      std::optional<std::string> value;
      if (o.needs_value) value = o.terminal.representative();
      const auto next = keyboard::apply_option(draft, view.next, o, g, value);
      if (next.draft.tokens.size() != draft.tokens.size() + 1) r.problems.push_back("apply did not add one token");
    } catch (const std::exception& e) {
      r.problems.push_back("option " + o.terminal.text + " does not apply: " + e.what());
    }
  }
  for (const auto& w : r.expected) {
    if (!r.offered.contains(w)) r.problems.push_back("valid continuation not offered: '" + w + "'");
  }
  for (const auto& w : r.offered) {
    if (!r.expected.contains(w)) r.problems.push_back("offered but not valid: '" + w + "'");
  }
  return r;
}

/// Token texts of the first `n` tokens of a rendered program.
inline keyboard::Draft prefix_draft(const lang::TokenSentence& s, std::size_t n) {
  keyboard::Draft d;
  for (std::size_t i = 0; i < n && i < s.tokens.size(); ++i) d.tokens.push_back(s.tokens[i].text);
  return d;
}

}  // namespace tapkit::testing
