#include "tapkit/lang/render.hpp"

#include <array>

namespace tapkit::lang {

namespace {

constexpr std::array<std::string_view, 11> kCategoryNames = {
    "keyword", "action", "event", "device", "kind", "location", "property", "variable", "value", "number", "program",
};

AstPath child(AstPath p, int i) {
  p.push_back(i);
  return p;
}

class Renderer {
 public:
  explicit Renderer(const Grammar& g) : g_(g) {}

  TokenSentence run(const Program& p) {
    emit(TokenCategory::kKeyword, std::string(kw::kProgram), {kHeaderChild});
    emit(TokenCategory::kProgram, p.name, {kHeaderChild});
    out_.tokens.back().suffix = ":";
    for (int i = 0; i < static_cast<int>(p.imperative.size()); ++i) {
      if (i > 0) emit(TokenCategory::kKeyword, std::string(kw::kThen), imperative_path(i));
      statement(p.imperative[i], imperative_path(i));
    }
    for (int j = 0; j < static_cast<int>(p.rules.size()); ++j) rule(p.rules[j], rule_path(j));
    return std::move(out_);
  }

 private:
  Token& emit(TokenCategory cat, std::string text, AstPath path) {
    Token t;
    t.display = text;
    t.text = std::move(text);
    t.category = cat;
    t.path = std::move(path);
    out_.tokens.push_back(std::move(t));
    return out_.tokens.back();
  }

  std::string format(const home::Domain* d, const Value& v) const {
    if (d && d->contains(v)) return d->format(v);
    return home::debug_string(v);
  }

  // Kind named or implied by a selector; null when the device is unheard of.
  const home::DeviceKind* kind_of(const EntitySelector& s) const {
    if (const auto* b = std::get_if<ById>(&s)) {
      const auto* dev = g_.device_by_id(b->id);
      if (!dev) dev = g_.unavailable(b->id);
      return dev ? g_.catalog().find(dev->kind) : nullptr;
    }
    return g_.catalog().find(selector_kind(s));
  }

  void selector(const EntitySelector& s, const AstPath& path, Quantifier q = Quantifier::kAll) {
    if (const auto* b = std::get_if<ById>(&s)) {
      if (const auto* dev = g_.device_by_id(b->id)) {
        emit(TokenCategory::kDevice, std::string(kDevicePrefix) + dev->name, path);
        return;
      }
      const auto* dev = g_.unavailable(b->id);
      auto& t = emit(TokenCategory::kDevice, std::string(kDevicePrefix) + (dev ? dev->name : "#" + b->id), path);
      t.display = std::string(kDevicePrefix) + std::string(kUnknownDisplay);
      t.unknown = true;
      return;
    }
    emit(TokenCategory::kKeyword, std::string(q == Quantifier::kAny ? kw::kAny : kw::kAll), path);
    emit(TokenCategory::kKind, selector_kind(s), child(path, 0));
    if (const auto* f = std::get_if<Filtered>(&s)) {
      if (f->property == kLocationProperty) {
        emit(TokenCategory::kKeyword, std::string(kw::kLocatedIn), child(path, 1));
        emit(TokenCategory::kLocation, f->value, child(path, 2));
      } else {
        emit(TokenCategory::kKeyword, std::string(kw::kWhose), child(path, 1));
        emit(TokenCategory::kProperty, f->property, child(path, 1));
        emit(TokenCategory::kKeyword, std::string(kw::kIs), child(path, 2));
        emit(TokenCategory::kValue, f->value, child(path, 2));
      }
    }
  }

  void program_ref(const std::string& id, const AstPath& path) {
    if (const auto* name = g_.program_name(id)) {
      emit(TokenCategory::kProgram, *name, path);
      return;
    }
    auto& t = emit(TokenCategory::kProgram, id, path);
    t.display = std::string(kUnknownDisplay);
    t.unknown = true;
  }

  void statement(const Statement& s, const AstPath& path) {
    if (const auto* a = std::get_if<ActionStmt>(&s)) {
      const auto* phrase = g_.catalog().action_phrase(a->action);
      emit(TokenCategory::kAction, phrase ? *phrase : a->action, child(path, 0));
      selector(a->target, child(path, 1));
      const auto* kind = kind_of(a->target);
      const auto* spec = kind ? kind->action(a->action) : nullptr;
      for (std::size_t k = 0; k < a->args.size(); ++k) {
        const auto arg_path = child(path, 2 + static_cast<int>(k));
        const home::ParamSpec* param = spec && k < spec->params.size() ? &spec->params[k] : nullptr;
        if (param && !param->phrase.empty()) emit(TokenCategory::kKeyword, param->phrase, arg_path);
        const home::Domain* d = param ? &param->domain : nullptr;
        emit(d ? literal_category(*d) : TokenCategory::kValue, format(d, a->args[k]), arg_path);
      }
    } else if (const auto* st = std::get_if<StartProgram>(&s)) {
      emit(TokenCategory::kKeyword, std::string(kw::kStart), child(path, 0));
      program_ref(st->program_id, child(path, 1));
    } else if (const auto* sp = std::get_if<StopProgram>(&s)) {
      emit(TokenCategory::kKeyword, std::string(kw::kStop), child(path, 0));
      program_ref(sp->program_id, child(path, 1));
    } else {
      const auto ms = std::get<Wait>(s).duration_ms;
      emit(TokenCategory::kKeyword, std::string(kw::kWait), child(path, 0));
      for (const auto& u : kWaitUnits) {
        if (ms % u.millis == 0) {
          emit(TokenCategory::kNumber, std::to_string(ms / u.millis), child(path, 1));
          emit(TokenCategory::kKeyword, std::string(u.word), child(path, 2));
          break;
        }
      }
    }
  }

  void rule(const Rule& r, const AstPath& path) {
    const auto trigger = child(path, 0);
    if (const auto* et = std::get_if<EventTrigger>(&r.trigger)) {
      emit(TokenCategory::kKeyword, std::string(kw::kEachTime), trigger);
      selector(et->source, child(trigger, 0));
      const auto* kind = kind_of(et->source);
      const auto* spec = kind ? kind->event(et->event) : nullptr;
      emit(TokenCategory::kEvent, spec ? spec->phrase : et->event, child(trigger, 1));
      if (et->key_value) {
        const home::Domain* d = nullptr;
        if (spec && spec->key) {
          if (!spec->key->phrase.empty()) emit(TokenCategory::kKeyword, spec->key->phrase, child(trigger, 2));
          d = &spec->payload.at(spec->key->field);
        }
        emit(d ? literal_category(*d) : TokenCategory::kValue, format(d, *et->key_value), child(trigger, 2));
      }
    } else {
      emit(TokenCategory::kKeyword, std::string(kw::kIf), trigger);
      condition(std::get<StateTrigger>(r.trigger).condition, child(trigger, 0));
    }
    const auto body = child(path, 1);
    emit(TokenCategory::kKeyword, std::string(kw::kDo), body);
    for (int k = 0; k < static_cast<int>(r.body.size()); ++k) {
      if (k > 0) emit(TokenCategory::kKeyword, std::string(kw::kThen), child(body, k));
      statement(r.body[k], child(body, k));
    }
  }

  static bool is_binary(const StateExpr& e) {
    return e.op == StateExpr::Op::kAnd || e.op == StateExpr::Op::kOr;
  }

  void operand(const StateExpr& e, const AstPath& path, bool parens) {
    if (parens) emit(TokenCategory::kKeyword, std::string(kw::kOpen), path);
    condition(e, path);
    if (parens) emit(TokenCategory::kKeyword, std::string(kw::kClose), path);
  }

  void condition(const StateExpr& e, const AstPath& path) {
    switch (e.op) {
      case StateExpr::Op::kAtom: {
        const auto& a = e.atom;
        selector(a.selector, child(path, 0), a.quantifier);
        emit(TokenCategory::kVariable, a.variable, child(path, 1));
        emit(TokenCategory::kKeyword, std::string(comparator_phrase(a.comparator)), child(path, 2));
        const auto* kind = kind_of(a.selector);
        const auto* var = kind ? kind->variable(a.variable) : nullptr;
        const home::Domain* d = var ? &var->domain : nullptr;
        emit(d ? literal_category(*d) : TokenCategory::kValue, format(d, a.literal), child(path, 3));
        return;
      }
      case StateExpr::Op::kNot:
        emit(TokenCategory::kKeyword, std::string(kw::kNot), path);
        operand(e.operands[0], child(path, 0), is_binary(e.operands[0]));
        return;
      case StateExpr::Op::kAnd:
        operand(e.operands[0], child(path, 0), e.operands[0].op == StateExpr::Op::kOr);
        emit(TokenCategory::kKeyword, std::string(kw::kAnd), path);
        operand(e.operands[1], child(path, 1), is_binary(e.operands[1]));
        return;
      case StateExpr::Op::kOr:
        operand(e.operands[0], child(path, 0), false);
        emit(TokenCategory::kKeyword, std::string(kw::kOr), path);
        operand(e.operands[1], child(path, 1), e.operands[1].op == StateExpr::Op::kOr);
        return;
    }
  }

  const Grammar& g_;
  TokenSentence out_;
};

}  // namespace

std::string_view to_string(TokenCategory c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

TokenCategory token_category_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == s) return static_cast<TokenCategory>(i);
  }
  throw Error(ErrorCode::kMalformedDocument, "unknown token category '" + std::string(s) + "'");
}

std::string TokenSentence::text() const {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t.text;
    out += t.suffix;
  }
  return out;
}

std::string Terminal::representative() const {
  switch (literal) {
    case LiteralClass::kNone: return text;
    case LiteralClass::kValue: return domain ? domain->format(domain->default_value()) : text;
    case LiteralClass::kName: return "Draft";
    case LiteralClass::kCount: return "1";
    case LiteralClass::kWord: return "somewhere";
  }
  return text;
}

nlohmann::json to_json(const Token& t) {
  nlohmann::json j{{"text", t.text},
                   {"display", t.display},
                   {"category", to_string(t.category)},
                   {"path", path_to_string(t.path)}};
  if (t.unknown) j["unknown"] = true;
  if (!t.suffix.empty()) j["suffix"] = t.suffix;
  return j;
}

Token token_from_json(const nlohmann::json& j) {
  try {
    Token t;
    t.text = j.at("text").get<std::string>();
    t.display = j.value("display", t.text);
    t.category = token_category_from_string(j.value("category", std::string("keyword")));
    t.path = path_from_string(j.value("path", std::string{}));
    t.unknown = j.value("unknown", false);
    t.suffix = j.value("suffix", std::string{});
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
}

nlohmann::json to_json(const Terminal& t) {
  nlohmann::json j{{"category", to_string(t.category)}, {"text", t.text}};
  if (t.is_literal()) {
    static constexpr std::string_view kClasses[] = {"none", "value", "name", "count", "word"};
    j["literal"] = kClasses[static_cast<std::size_t>(t.literal)];
    if (t.domain) j["domain"] = home::to_json(*t.domain);
  }
  return j;
}

nlohmann::json to_json(const InsertionPoint& p) { return {{"path", path_to_string(p.path)}, {"slot", p.slot}}; }

InsertionPoint insertion_point_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("path")) throw Error(ErrorCode::kInvalidInsertionPoint, "point needs a path");
  InsertionPoint p;
  const auto& path = j.at("path");
  if (path.is_string()) {
    p.path = path_from_string(path.get<std::string>());
  } else if (path.is_array()) {
    for (const auto& i : path) {
      if (!i.is_number_integer()) throw Error(ErrorCode::kInvalidInsertionPoint, "path entries must be integers");
      p.path.push_back(i.get<int>());
    }
  } else {
    throw Error(ErrorCode::kInvalidInsertionPoint, "path must be a string or an array");
  }
  const auto& slot = j.value("slot", nlohmann::json(0));
  if (!slot.is_number_integer()) throw Error(ErrorCode::kInvalidInsertionPoint, "slot must be an integer");
  p.slot = slot.get<int>();
  return p;
}

TokenSentence render(const Program& program, const Grammar& grammar) { return Renderer(grammar).run(program); }

std::string render_text(const Program& program, const Grammar& grammar) { return render(program, grammar).text(); }

}  // namespace tapkit::lang
