#include "tapkit/lang/parser.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace tapkit::lang {

namespace {

bool is_word(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

std::vector<std::string> split_words(std::string_view phrase) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < phrase.size()) {
    while (i < phrase.size() && phrase[i] == ' ') ++i;
    std::size_t j = i;
    while (j < phrase.size() && phrase[j] != ' ') ++j;
    if (j > i) out.emplace_back(phrase.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string describe_expected(const std::vector<Terminal>& expected) {
  std::string out;
  for (const auto& t : expected) {
    if (!out.empty()) out += ", ";
    out += "'" + t.text + "'";
  }
  return out.empty() ? "nothing" : out;
}

struct Incomplete {};

enum class Use { kAction, kEvent, kCondition };

/// One alternative at a decision point.
struct Cand {
  Terminal term;
  std::vector<std::string> words;  // phrase words; empty for literal classes
  int tag = 0;
  std::string ref;                  // action name, device id, kind, program id, ...
  std::optional<Value> value;       // for enumerated literals and wait units
  AstPath path;                     // token path override
};

enum Tag {
  kTagNone,
  kTagAction,
  kTagStart,
  kTagStop,
  kTagWait,
  kTagEachTime,
  kTagIf,
  kTagThen,
  kTagDevice,
  kTagAll,
  kTagAny,
  kTagLocatedIn,
  kTagWhose,
  kTagNot,
  kTagOpen,
};

Cand keyword(std::string_view text, int tag = kTagNone) {
  return Cand{Terminal{TokenCategory::kKeyword, std::string(text), LiteralClass::kNone, {}}, split_words(text), tag,
              {}, {}, {}};
}

Cand phrase(TokenCategory cat, const std::string& text, std::string ref = {}, int tag = kTagNone) {
  return Cand{Terminal{cat, text, LiteralClass::kNone, {}}, split_words(text), tag, std::move(ref), {}, {}};
}

Cand literal(TokenCategory cat, std::string placeholder, LiteralClass cls, std::optional<home::Domain> d = {}) {
  return Cand{Terminal{cat, std::move(placeholder), cls, std::move(d)}, {}, kTagNone, {}, {}, {}};
}

void add_domain(std::vector<Cand>& out, const home::Domain& d) {
  if (d.enumerable()) {
    for (const auto& v : d.enumerate()) {
      auto c = phrase(literal_category(d), d.format(v));
      c.value = v;
      out.push_back(std::move(c));
    }
  } else {
    out.push_back(literal(literal_category(d), "<" + d.describe() + ">", LiteralClass::kValue, d));
  }
}

AstPath child(AstPath p, int i) {
  p.push_back(i);
  return p;
}

AstPath child(AstPath p, int i, int j) {
  p.push_back(i);
  p.push_back(j);
  return p;
}

class Parser {
 public:
  Parser(std::vector<Word> words, const Grammar& g, std::size_t text_size)
      : words_(std::move(words)), g_(g), text_size_(text_size) {}

  ParseOutcome run(const std::string& program_id) {
    ParseOutcome out;
    try {
      auto program = parse_program();
      program.program_id = program_id;
      out.status = ParseOutcome::Status::kComplete;
      out.program = std::move(program);
    } catch (const Incomplete&) {
      out.status = ParseOutcome::Status::kIncomplete;
    } catch (const SyntaxError& e) {
      out.status = ParseOutcome::Status::kError;
      out.error_position = e.position();
      out.found = e.found();
      out.expected = e.expected();
      out.tokens.tokens = std::move(tokens_);
      out.matched = std::move(matched_);
      return out;
    }
    out.tokens.tokens = std::move(tokens_);
    out.matched = std::move(matched_);
    if (noted_at_ == words_.size()) out.expected.assign(noted_.begin(), noted_.end());
    if (frontier_) out.frontier = *frontier_;
    return out;
  }

 private:
  struct Hit {
    Cand cand;
    std::string text;
  };

  // ---- matching ----

  void note(const std::vector<Cand>& cands, const AstPath& path) {
    if (noted_at_ != pos_) {
      noted_.clear();
      noted_at_ = pos_;
    }
    for (const auto& c : cands) noted_.insert(c.term);
    if (pos_ == words_.size() && !frontier_) {
      InsertionPoint p;
      p.path = path;
      if (!p.path.empty()) {
        p.slot = p.path.back();
        p.path.pop_back();
      }
      frontier_ = p;
    }
  }

  [[noreturn]] void fail() {
    std::vector<Terminal> expected;
    if (noted_at_ == pos_) expected.assign(noted_.begin(), noted_.end());
    if (pos_ >= words_.size()) throw SyntaxError(text_size_, std::move(expected), "");
    throw SyntaxError(words_[pos_].offset, std::move(expected), words_[pos_].text);
  }

  std::optional<Hit> match(const std::vector<Cand>& cands, const AstPath& path, bool required,
                           bool allow_suffix = false) {
    note(cands, path);
    if (pos_ >= words_.size()) {
      if (required) throw Incomplete{};
      return std::nullopt;
    }
    const Cand* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& c : cands) {
      if (c.term.is_literal() || c.words.empty()) continue;
      const auto n = c.words.size();
      if (n <= best_len || pos_ + n > words_.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; k < n && ok; ++k) ok = words_[pos_ + k].text == c.words[k];
      if (ok) {
        best = &c;
        best_len = n;
      }
    }
    if (!best) {
      for (const auto& c : cands) {
        if (c.term.is_literal() && accepts(c.term, words_[pos_].text)) {
          best = &c;
          best_len = 1;
          break;
        }
      }
    }
    if (!best) {
      if (required) fail();
      return std::nullopt;
    }
    Hit hit{*best, {}};
    std::string suffix;
    for (std::size_t k = 0; k < best_len; ++k) {
      const auto& w = words_[pos_ + k];
      if (!w.suffix.empty() && (!allow_suffix || k + 1 != best_len)) {
        throw SyntaxError(w.offset + w.text.size(), {}, w.suffix);
      }
      if (k) hit.text += ' ';
      hit.text += w.text;
      suffix = w.suffix;
    }
    pos_ += best_len;
    Token t;
    t.text = hit.text;
    t.display = hit.text;
    t.category = best->term.category;
    t.path = best->path.empty() ? path : best->path;
    t.suffix = suffix;
    tokens_.push_back(std::move(t));
    matched_.push_back(best->term);
    return hit;
  }

  Hit require(const std::vector<Cand>& cands, const AstPath& path, bool allow_suffix = false) {
    return *match(cands, path, true, allow_suffix);
  }

  Value value_of(const Hit& hit, const home::Domain& d) const {
    if (hit.cand.value) return *hit.cand.value;
    return *d.parse(hit.text);
  }

  // ---- vocabulary filters ----

  const home::DeviceKind* kind(std::string_view name) const { return g_.catalog().find(name); }

  static bool kind_fits(const home::DeviceKind& k, Use use, const std::string& action) {
    switch (use) {
      case Use::kAction: return k.action(action) != nullptr;
      case Use::kEvent: return !k.events.empty();
      case Use::kCondition: return !k.variables.empty();
    }
    return false;
  }

  std::vector<std::string> kinds_for(Use use, const std::string& action = {}) const {
    std::vector<std::string> out;
    for (const auto& name : g_.kinds()) {
      const auto* k = kind(name);
      if (k && kind_fits(*k, use, action)) out.push_back(name);
    }
    return out;
  }

  std::vector<Cand> statement_starters(const AstPath& stmt) const {
    std::vector<Cand> out;
    std::set<std::string> actions;
    for (const auto& name : g_.kinds()) {
      if (const auto* k = kind(name)) {
        for (const auto& [a, _] : k->actions) actions.insert(a);
      }
    }
    for (const auto& a : actions) {
      out.push_back(phrase(TokenCategory::kAction, *g_.catalog().action_phrase(a), a, kTagAction));
    }
    if (!g_.programs_by_name().empty()) {
      out.push_back(keyword(kw::kStart, kTagStart));
      out.push_back(keyword(kw::kStop, kTagStop));
    }
    out.push_back(keyword(kw::kWait, kTagWait));
    for (auto& c : out) c.path = child(stmt, 0);
    return out;
  }

  std::vector<Cand> rule_starters(int rule) const {
    std::vector<Cand> out;
    const AstPath path{kRulesChild, rule, 0};
    if (!kinds_for(Use::kEvent).empty()) out.push_back(keyword(kw::kEachTime, kTagEachTime));
    if (!kinds_for(Use::kCondition).empty()) out.push_back(keyword(kw::kIf, kTagIf));
    for (auto& c : out) c.path = path;
    return out;
  }

  // ---- program structure ----

  Program parse_program() {
    Program p;
    require({keyword(kw::kProgram)}, {kHeaderChild});
    auto name = require({literal(TokenCategory::kProgram, "<name>", LiteralClass::kName)}, {kHeaderChild}, true);
    p.name = name.text;

    auto first = statement_starters(imperative_path(0));
    auto rules = rule_starters(0);
    first.insert(first.end(), rules.begin(), rules.end());
    auto hit = require(first, child(imperative_path(0), 0));
    if (hit.cand.tag != kTagEachTime && hit.cand.tag != kTagIf) {
      p.imperative.push_back(parse_statement(hit, imperative_path(0)));
      for (int i = 1;; ++i) {
        std::vector<Cand> next{keyword(kw::kThen, kTagThen)};
        next.back().path = imperative_path(i);
        auto more = rule_starters(0);
        next.insert(next.end(), more.begin(), more.end());
        auto h = match(next, imperative_path(i), false);
        if (!h) {
          if (pos_ < words_.size()) fail();
          return p;
        }
        if (h->cand.tag != kTagThen) {
          hit = *h;
          break;
        }
        auto s = require(statement_starters(imperative_path(i)), child(imperative_path(i), 0));
        p.imperative.push_back(parse_statement(s, imperative_path(i)));
      }
    }
    for (int j = 0;; ++j) {
      p.rules.push_back(parse_rule(hit, j));
      auto h = match(rule_starters(j + 1), rule_path(j + 1), false);
      if (!h) {
        if (pos_ < words_.size()) fail();
        return p;
      }
      hit = *h;
    }
  }

  Rule parse_rule(const Hit& starter, int j) {
    Rule r;
    r.index = j;
    const AstPath trigger = child(rule_path(j), 0);
    if (starter.cand.tag == kTagEachTime) {
      r.trigger = parse_event_trigger(trigger);
    } else {
      r.trigger = StateTrigger{parse_condition(child(trigger, 0))};
    }
    const AstPath body = child(rule_path(j), 1);
    require({keyword(kw::kDo)}, body);
    auto s = require(statement_starters(child(body, 0)), child(body, 0, 0));
    r.body.push_back(parse_statement(s, child(body, 0)));
    for (int k = 1;; ++k) {
      std::vector<Cand> next{keyword(kw::kThen, kTagThen)};
      next.back().path = child(body, k);
      auto more = rule_starters(j + 1);
      next.insert(next.end(), more.begin(), more.end());
      // Only 'then' is consumed here; a rule starter is left for the caller.
      note(next, child(body, k));
      if (pos_ < words_.size() && words_[pos_].text == kw::kThen && words_[pos_].suffix.empty()) {
        match({next.front()}, child(body, k), true);
        auto st = require(statement_starters(child(body, k)), child(body, k, 0));
        r.body.push_back(parse_statement(st, child(body, k)));
        continue;
      }
      return r;
    }
  }

  Statement parse_statement(const Hit& starter, const AstPath& path) {
    switch (starter.cand.tag) {
      case kTagAction: return parse_action(starter.cand.ref, path);
      case kTagStart:
      case kTagStop: {
        std::vector<Cand> cands;
        for (const auto& [name, id] : g_.programs_by_name()) cands.push_back(phrase(TokenCategory::kProgram, name, id));
        auto h = require(cands, child(path, 1));
        if (starter.cand.tag == kTagStart) return StartProgram{h.cand.ref};
        return StopProgram{h.cand.ref};
      }
      case kTagWait: {
        auto amount = require({literal(TokenCategory::kNumber, "<count>", LiteralClass::kCount)}, child(path, 1));
        std::vector<Cand> units;
        for (const auto& u : kWaitUnits) {
          units.push_back(keyword(u.word));
          units.back().value = Value{static_cast<std::int64_t>(u.millis)};
        }
        auto unit = require(units, child(path, 2));
        return Wait{std::stoll(amount.text) * std::get<std::int64_t>(*unit.cand.value)};
      }
      default: break;
    }
    fail();
  }

  ActionStmt parse_action(const std::string& action, const AstPath& path) {
    ActionStmt a;
    a.action = action;
    std::string kind_name;
    a.target = parse_selector(Use::kAction, action, child(path, 1), kind_name, nullptr);
    const auto* spec = kind(kind_name)->action(action);
    for (std::size_t k = 0; k < spec->params.size(); ++k) {
      const auto& param = spec->params[k];
      const auto arg_path = child(path, 2 + static_cast<int>(k));
      if (!param.phrase.empty()) require({keyword(param.phrase)}, arg_path);
      std::vector<Cand> cands;
      add_domain(cands, param.domain);
      a.args.push_back(value_of(require(cands, arg_path), param.domain));
    }
    return a;
  }

  EventTrigger parse_event_trigger(const AstPath& path) {
    EventTrigger t;
    std::string kind_name;
    t.source = parse_selector(Use::kEvent, {}, child(path, 0), kind_name, nullptr);
    const auto* k = kind(kind_name);
    std::vector<Cand> events;
    for (const auto& [name, e] : k->events) events.push_back(phrase(TokenCategory::kEvent, e.phrase, name));
    auto h = require(events, child(path, 1));
    t.event = h.cand.ref;
    const auto& spec = *k->event(t.event);
    if (!spec.key) return t;
    const auto& domain = spec.payload.at(spec.key->field);
    const auto key_path = child(path, 2);
    std::vector<Cand> values;
    add_domain(values, domain);
    if (!spec.key->phrase.empty()) {
      if (!match({keyword(spec.key->phrase)}, key_path, spec.key->required)) return t;
      t.key_value = value_of(require(values, key_path), domain);
    } else if (auto v = match(values, key_path, spec.key->required)) {
      t.key_value = value_of(*v, domain);
    }
    return t;
  }

  // Selector at `path`. Reports the selected kind; `quantifier` is set when
  // non-null (conditions admit "any").
  EntitySelector parse_selector(Use use, const std::string& action, const AstPath& path, std::string& kind_name,
                                Quantifier* quantifier) {
    std::vector<Cand> cands;
    for (const auto& [name, dev] : g_.devices()) {
      const auto* k = kind(dev.kind);
      if (k && kind_fits(*k, use, action)) {
        cands.push_back(phrase(TokenCategory::kDevice, std::string(kDevicePrefix) + name, dev.id, kTagDevice));
      }
    }
    const auto kinds = kinds_for(use, action);
    if (!kinds.empty()) {
      cands.push_back(keyword(kw::kAll, kTagAll));
      if (use == Use::kCondition) cands.push_back(keyword(kw::kAny, kTagAny));
    }
    auto h = require(cands, path);
    if (quantifier) *quantifier = h.cand.tag == kTagAny ? Quantifier::kAny : Quantifier::kAll;
    if (h.cand.tag == kTagDevice) {
      kind_name = g_.device_by_id(h.cand.ref)->kind;
      return ById{h.cand.ref};
    }

    std::vector<Cand> kind_cands;
    for (const auto& k : kinds) kind_cands.push_back(phrase(TokenCategory::kKind, k, k));
    kind_name = require(kind_cands, child(path, 0)).cand.ref;

    const bool free = g_.free_words();
    const auto locations = g_.locations(kind_name);
    const auto properties = g_.properties(kind_name);
    std::vector<Cand> filters;
    if (free || !locations.empty()) filters.push_back(keyword(kw::kLocatedIn, kTagLocatedIn));
    if (free || !properties.empty()) filters.push_back(keyword(kw::kWhose, kTagWhose));
    auto f = filters.empty() ? std::nullopt : match(filters, child(path, 1), false);
    if (!f) return AllOfKind{kind_name};

    if (f->cand.tag == kTagLocatedIn) {
      std::vector<Cand> locs;
      if (free) {
        locs.push_back(literal(TokenCategory::kLocation, "<location>", LiteralClass::kWord));
      } else {
        for (const auto& l : locations) locs.push_back(phrase(TokenCategory::kLocation, l));
      }
      return Filtered{kind_name, std::string(kLocationProperty), require(locs, child(path, 2)).text};
    }
    std::vector<Cand> props;
    if (free) {
      props.push_back(literal(TokenCategory::kProperty, "<property>", LiteralClass::kWord));
    } else {
      for (const auto& [label, _] : properties) props.push_back(phrase(TokenCategory::kProperty, label));
    }
    auto prop = require(props, child(path, 1)).text;
    require({keyword(kw::kIs)}, child(path, 2));
    std::vector<Cand> values;
    if (free) {
      values.push_back(literal(TokenCategory::kValue, "<word>", LiteralClass::kWord));
    } else {
      for (const auto& v : properties.at(prop)) values.push_back(phrase(TokenCategory::kValue, v));
    }
    return Filtered{kind_name, prop, require(values, child(path, 2)).text};
  }

  // ---- conditions ----

  // Moves tokens emitted since `from` under path p to p+[0]: the subtree
  // just parsed becomes the left operand of a binary node at p.
  void demote(std::size_t from, const AstPath& p) {
    for (std::size_t i = from; i < tokens_.size(); ++i) {
      auto& path = tokens_[i].path;
      if (path_has_prefix(path, p)) path.insert(path.begin() + static_cast<std::ptrdiff_t>(p.size()), 0);
    }
  }

  StateExpr parse_condition(const AstPath& p) {
    const auto start = tokens_.size();
    auto e = parse_conjunction(p);
    while (true) {
      note({keyword(kw::kOr)}, p);
      if (pos_ >= words_.size() || words_[pos_].text != kw::kOr) return e;
      demote(start, p);
      match({keyword(kw::kOr)}, p, true);
      e = StateExpr::either(std::move(e), parse_conjunction(child(p, 1)));
    }
  }

  StateExpr parse_conjunction(const AstPath& p) {
    const auto start = tokens_.size();
    auto e = parse_unary(p);
    while (true) {
      note({keyword(kw::kAnd)}, p);
      if (pos_ >= words_.size() || words_[pos_].text != kw::kAnd) return e;
      demote(start, p);
      match({keyword(kw::kAnd)}, p, true);
      e = StateExpr::both(std::move(e), parse_unary(child(p, 1)));
    }
  }

  StateExpr parse_unary(const AstPath& p) {
    // Peek at the atom-starting alternatives without consuming; the selector
    // parser re-matches them at the same position.
    std::vector<Cand> openers{keyword(kw::kNot, kTagNot), keyword(kw::kOpen, kTagOpen)};
    auto h = match(openers, p, false);
    if (h && h->cand.tag == kTagNot) return StateExpr::negate(parse_unary(child(p, 0)));
    if (h && h->cand.tag == kTagOpen) {
      auto inner = parse_condition(p);
      require({keyword(kw::kClose)}, p);
      return inner;
    }
    return StateExpr::leaf(parse_atom(p));
  }

  Atom parse_atom(const AstPath& p) {
    Atom a;
    std::string kind_name;
    a.selector = parse_selector(Use::kCondition, {}, child(p, 0), kind_name, &a.quantifier);
    const auto* k = kind(kind_name);
    std::vector<Cand> vars;
    for (const auto& v : k->variables) vars.push_back(phrase(TokenCategory::kVariable, v.name, v.name));
    a.variable = require(vars, child(p, 1)).cand.ref;
    const auto& domain = k->variable(a.variable)->domain;
    std::vector<Cand> comps;
    for (auto c : comparators_for(domain)) {
      comps.push_back(keyword(comparator_phrase(c)));
      comps.back().value = Value{static_cast<std::int64_t>(c)};
    }
    a.comparator = static_cast<Comparator>(std::get<std::int64_t>(*require(comps, child(p, 2)).cand.value));
    std::vector<Cand> values;
    add_domain(values, domain);
    a.literal = value_of(require(values, child(p, 3)), domain);
    return a;
  }

  std::vector<Word> words_;
  std::size_t pos_ = 0;
  const Grammar& g_;
  std::size_t text_size_;
  std::vector<Token> tokens_;
  std::vector<Terminal> matched_;
  std::size_t noted_at_ = static_cast<std::size_t>(-1);
  std::set<Terminal> noted_;
  std::optional<InsertionPoint> frontier_;
};

}  // namespace

SyntaxError::SyntaxError(std::size_t position, std::vector<Terminal> expected, std::string found)
    : Error(ErrorCode::kSyntaxError,
            "at offset " + std::to_string(position) + ": " +
                (found.empty() ? std::string("unexpected end of text") : "unexpected '" + found + "'") +
                "; expected " + describe_expected(expected)),
      position_(position),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

std::vector<Word> lex(std::string_view text) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '(' || c == ')') {
      out.push_back(Word{std::string(1, c), i, {}});
      ++i;
      continue;
    }
    if (c == ':' && (i + 1 == text.size() || std::string_view(" \t\r\n()").find(text[i + 1]) != std::string_view::npos)) {
      // A free-standing colon attaches to the word before it.
      if (!out.empty() && out.back().suffix.empty()) {
        out.back().suffix = ":";
      } else {
        out.push_back(Word{":", i, {}});
      }
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::string_view(" \t\r\n()").find(text[j]) == std::string_view::npos) ++j;
    Word w{std::string(text.substr(i, j - i)), i, {}};
    if (w.text.size() > 1 && w.text.back() == ':') {
      w.text.pop_back();
      w.suffix = ":";
    }
    out.push_back(std::move(w));
    i = j;
  }
  return out;
}

bool accepts(const Terminal& t, std::string_view word) {
  switch (t.literal) {
    case LiteralClass::kNone: return word == t.text;
    case LiteralClass::kValue: return t.domain && t.domain->parse(word).has_value();
    case LiteralClass::kName:
    case LiteralClass::kWord: return is_word(word);
    case LiteralClass::kCount: {
      if (word.empty() || word.size() > 10 || word[0] == '0') return false;
      std::int64_t n = 0;
      auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), n);
      return ec == std::errc{} && ptr == word.data() + word.size() && n >= 1 && n <= kMaxWaitAmount;
    }
  }
  return false;
}

ParseOutcome parse_prefix(std::string_view text, const Grammar& grammar, const std::string& program_id) {
  return Parser(lex(text), grammar, text.size()).run(program_id);
}

ParseOutcome parse_tokens(const std::vector<std::string>& token_texts, const Grammar& grammar) {
  std::string text;
  for (const auto& t : token_texts) {
    if (!text.empty()) text += ' ';
    text += t;
  }
  return parse_prefix(text, grammar);
}

Program parse(std::string_view text, const Grammar& grammar, const std::string& program_id) {
  auto out = parse_prefix(text, grammar, program_id);
  switch (out.status) {
    case ParseOutcome::Status::kComplete: return std::move(*out.program);
    case ParseOutcome::Status::kIncomplete: throw SyntaxError(text.size(), std::move(out.expected), "");
    case ParseOutcome::Status::kError: break;
  }
  throw SyntaxError(out.error_position, std::move(out.expected), out.found);
}

}  // namespace tapkit::lang
