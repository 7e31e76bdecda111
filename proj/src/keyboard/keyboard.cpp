#include "tapkit/keyboard/keyboard.hpp"

#include <algorithm>

namespace tapkit::keyboard {

namespace {

using lang::ParseOutcome;
using lang::TokenCategory;

int rank(TokenCategory c) {
  switch (c) {
    case TokenCategory::kKeyword: return 0;
    case TokenCategory::kDevice: return 1;
    case TokenCategory::kKind: return 2;
    case TokenCategory::kAction: return 3;
    case TokenCategory::kEvent: return 4;
    case TokenCategory::kLocation: return 5;
    case TokenCategory::kProperty: return 6;
    case TokenCategory::kVariable: return 7;
    case TokenCategory::kValue: return 8;
    case TokenCategory::kNumber: return 9;
    case TokenCategory::kProgram: return 10;
  }
  return 11;
}

ParseOutcome read(const std::vector<std::string>& tokens, const lang::Grammar& grammar) {
  auto out = lang::parse_tokens(tokens, grammar);
  if (!out.valid_prefix()) throw lang::SyntaxError(out.error_position, out.expected, out.found);
  return out;
}

DraftView view_of(Draft draft, ParseOutcome outcome, const lang::Grammar& grammar) {
  DraftView v;
  v.draft = std::move(draft);
  v.sentence = std::move(outcome.tokens);
  v.next = outcome.frontier;
  v.complete = outcome.status == ParseOutcome::Status::kComplete;
  v.program = std::move(outcome.program);
  v.generation = grammar.generation();
  return v;
}

// True when a parameterless action would change nothing on this device.
bool effect_already_holds(const home::ActionSpec& action, const home::DeviceState& state) {
  if (!action.params.empty() || action.effect.empty()) return false;
  for (const auto& [var, src] : action.effect) {
    if (src.is_reference()) return false;
    auto it = state.values.find(var);
    if (it == state.values.end() || it->second.value != std::get<home::Value>(src.source)) return false;
  }
  return true;
}

Availability device_availability(const std::string& option_text, const std::vector<std::string>& draft,
                                 const ParseOutcome& outcome, const lang::Grammar& grammar,
                                 const home::RegistrySnapshot& registry) {
  const auto* dev = grammar.device_by_name(option_text.substr(lang::kDevicePrefix.size()));
  if (!dev) return Availability::kAvailable;
  if (draft.empty() || outcome.tokens.tokens.empty() || outcome.tokens.tokens.back().category != TokenCategory::kAction) {
    return Availability::kAvailable;
  }
  const auto* action_name = grammar.catalog().action_by_phrase(draft.back());
  const auto* kind = grammar.catalog().find(dev->kind);
  const auto* action = kind && action_name ? kind->action(*action_name) : nullptr;
  auto state = registry.states.find(dev->id);
  if (!action || state == registry.states.end()) return Availability::kAvailable;
  return effect_already_holds(*action, state->second) ? Availability::kStateFilteredOut : Availability::kAvailable;
}

void require_frontier(const ParseOutcome& outcome, const lang::InsertionPoint& point) {
  if (point == outcome.frontier) return;
  throw Error(ErrorCode::kInvalidInsertionPoint,
              "drafts are edited at their end (" + path_to_string(outcome.frontier.path) + "/" +
                  std::to_string(outcome.frontier.slot) + "), not at " + path_to_string(point.path) + "/" +
                  std::to_string(point.slot));
}

}  // namespace

std::string_view to_string(Availability a) {
  switch (a) {
    case Availability::kNotDevice: return "";
    case Availability::kAvailable: return "available";
    case Availability::kStateFilteredOut: return "state-filtered-out";
  }
  return "";
}

DraftView inspect(const Draft& draft, const lang::Grammar& grammar) {
  return view_of(draft, read(draft.tokens, grammar), grammar);
}

Draft draft_from_text(std::string_view text, const lang::Grammar& grammar) {
  auto outcome = lang::parse_prefix(text, grammar);
  if (!outcome.valid_prefix()) throw lang::SyntaxError(outcome.error_position, outcome.expected, outcome.found);
  Draft d;
  for (const auto& t : outcome.tokens.tokens) d.tokens.push_back(t.text);
  return d;
}

std::vector<CompletionOption> options(const Draft& draft, const lang::InsertionPoint& point,
                                      const lang::Grammar& grammar, const home::RegistrySnapshot& registry) {
  const auto outcome = read(draft.tokens, grammar);
  require_frontier(outcome, point);
  std::vector<CompletionOption> out;
  auto probe = draft.tokens;
  probe.emplace_back();
  for (const auto& t : outcome.expected) {
    probe.back() = t.representative();
    auto next = lang::parse_tokens(probe, grammar);
    // Every expected terminal reads back as itself; anything else would be
    // a parser bug that the completeness tests catch.
    if (!next.valid_prefix() || next.matched.size() != probe.size() || !(next.matched.back() == t)) continue;
    CompletionOption o;
    o.token = next.tokens.tokens.back();
    o.terminal = t;
    o.needs_value = t.is_literal();
    if (o.needs_value) {
      o.token.text = t.text;
      o.token.display = t.text;
    }
    if (t.category == TokenCategory::kDevice) {
      o.availability = device_availability(t.text, draft.tokens, outcome, grammar, registry);
    }
    o.generation = grammar.generation();
    out.push_back(std::move(o));
  }
  std::stable_sort(out.begin(), out.end(), [](const CompletionOption& a, const CompletionOption& b) {
    const int ra = rank(a.terminal.category), rb = rank(b.terminal.category);
    if (ra != rb) return ra < rb;
    return a.terminal.text < b.terminal.text;
  });
  return out;
}

DraftView apply_option(const Draft& draft, const lang::InsertionPoint& point, const CompletionOption& option,
                       const lang::Grammar& grammar, const std::optional<std::string>& value) {
  if (option.generation != grammar.generation()) {
    throw Error(ErrorCode::kStaleOption, "option was computed for generation " + std::to_string(option.generation) +
                                             "; the grammar is now at " + std::to_string(grammar.generation()));
  }
  const auto outcome = read(draft.tokens, grammar);
  require_frontier(outcome, point);
  std::string text = option.terminal.text;
  if (option.terminal.is_literal()) {
    if (!value || !lang::accepts(option.terminal, *value)) {
      throw Error(ErrorCode::kValidationFailed,
                  "option " + option.terminal.text + " needs a value" + (value ? ", not '" + *value + "'" : ""));
    }
    text = *value;
  }
  Draft next = draft;
  next.tokens.push_back(text);
  auto result = lang::parse_tokens(next.tokens, grammar);
  if (!result.valid_prefix() || result.matched.size() != next.tokens.size() ||
      !(result.matched.back() == option.terminal)) {
    throw Error(ErrorCode::kValidationFailed, "'" + text + "' does not fit at the end of this draft");
  }
  return view_of(std::move(next), std::move(result), grammar);
}

DraftView delete_at(const Draft& draft, const lang::InsertionPoint& point, const lang::Grammar& grammar) {
  if (draft.empty()) return inspect(draft, grammar);
  auto node = point.path;
  node.push_back(point.slot);
  if (node == AstPath{lang::kHeaderChild}) return inspect(Draft{}, grammar);

  const auto outcome = read(draft.tokens, grammar);
  const auto& tokens = outcome.tokens.tokens;
  std::vector<std::size_t> span;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (path_has_prefix(tokens[i].path, node)) span.push_back(i);
  }
  if (span.empty()) {
    throw Error(ErrorCode::kInvalidInsertionPoint, "nothing at " + path_to_string(node) + " to delete");
  }

  auto without = [&](std::size_t extra) {
    Draft d;
    for (std::size_t i = 0; i < draft.tokens.size(); ++i) {
      if (std::find(span.begin(), span.end(), i) == span.end() && i != extra) d.tokens.push_back(draft.tokens[i]);
    }
    return d;
  };
  auto try_draft = [&](const Draft& d) -> std::optional<DraftView> {
    auto r = lang::parse_tokens(d.tokens, grammar);
    if (!r.valid_prefix()) return std::nullopt;
    return view_of(d, std::move(r), grammar);
  };

  // The node alone, then the node with the separator that followed it.
  if (auto v = try_draft(without(static_cast<std::size_t>(-1)))) return *v;
  const auto after = span.back() + 1;
  if (after < tokens.size() && tokens[after].text == lang::kw::kThen) {
    if (auto v = try_draft(without(after))) return *v;
  }
  // Otherwise everything from the node on goes; a prefix of a valid prefix
  // is still one.
  Draft cut;
  cut.tokens.assign(draft.tokens.begin(), draft.tokens.begin() + static_cast<std::ptrdiff_t>(span.front()));
  return view_of(cut, read(cut.tokens, grammar), grammar);
}

nlohmann::json to_json(const CompletionOption& o) {
  nlohmann::json j{{"token", lang::to_json(o.token)},
                   {"terminal", lang::to_json(o.terminal)},
                   {"category", lang::to_string(o.terminal.category)},
                   {"needs_value", o.needs_value},
                   {"generation", o.generation},
                   {"edit", {{"append", o.terminal.text}}}};
  if (o.availability != Availability::kNotDevice) j["availability"] = to_string(o.availability);
  return j;
}

CompletionOption option_from_json(const nlohmann::json& j) {
  try {
    CompletionOption o;
    const auto& t = j.at("terminal");
    o.terminal.category = lang::token_category_from_string(t.at("category").get<std::string>());
    o.terminal.text = t.at("text").get<std::string>();
    const auto cls = t.value("literal", std::string("none"));
    if (cls == "value") o.terminal.literal = lang::LiteralClass::kValue;
    if (cls == "name") o.terminal.literal = lang::LiteralClass::kName;
    if (cls == "count") o.terminal.literal = lang::LiteralClass::kCount;
    if (cls == "word") o.terminal.literal = lang::LiteralClass::kWord;
    if (t.contains("domain")) o.terminal.domain = home::domain_from_json(t.at("domain"));
    if (o.terminal.literal == lang::LiteralClass::kValue && !o.terminal.domain) {
      throw Error(ErrorCode::kMalformedDocument, "value options carry their domain");
    }
    o.needs_value = o.terminal.is_literal();
    o.generation = j.at("generation").get<std::uint64_t>();
    if (j.contains("token")) o.token = lang::token_from_json(j.at("token"));
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("bad option: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedCatalog) throw Error(ErrorCode::kMalformedDocument, e.what());
    throw;
  }
}

nlohmann::json to_json(const DraftView& v) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : v.sentence.tokens) tokens.push_back(lang::to_json(t));
  nlohmann::json j{{"draft", v.draft.tokens},
                   {"tokens", tokens},
                   {"text", v.sentence.text()},
                   {"next", lang::to_json(v.next)},
                   {"complete", v.complete},
                   {"generation", v.generation}};
  if (v.program) j["ast"] = lang::to_json(*v.program);
  return j;
}

}  // namespace tapkit::keyboard
