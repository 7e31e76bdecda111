#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/home/registry.hpp"
#include "tapkit/lang/grammar.hpp"
#include "tapkit/lang/parser.hpp"
#include "tapkit/lang/tokens.hpp"

namespace tapkit::keyboard {

/// A program being edited: a token sequence that is a valid prefix of some
/// program. Editing happens at the end of the sequence.
struct Draft {
  std::vector<std::string> tokens;

  bool empty() const { return tokens.empty(); }
  bool operator==(const Draft&) const = default;
};

enum class Availability { kNotDevice, kAvailable, kStateFilteredOut };

std::string_view to_string(Availability a);

struct CompletionOption {
  lang::Token token;         // as it would appear once inserted; literals show a placeholder
  lang::Terminal terminal;   // identity within the grammar
  bool needs_value = false;  // literal class: apply with a concrete word
  Availability availability = Availability::kNotDevice;
  std::uint64_t generation = 0;  // grammar generation it was computed under
};

/// A draft as the current grammar reads it.
struct DraftView {
  Draft draft;
  lang::TokenSentence sentence;
  lang::InsertionPoint next;  // the frontier: where the next token goes
  bool complete = false;      // a whole program (may still be extended)
  std::optional<lang::Program> program;
  std::uint64_t generation = 0;
};

/// Reads a draft; throws SyntaxError if it is not a valid prefix.
DraftView inspect(const Draft& draft, const lang::Grammar& grammar);

/// Draft whose tokens are the words of `text` as the grammar groups them.
Draft draft_from_text(std::string_view text, const lang::Grammar& grammar);

/// Every token that may be inserted at `point`, ordered keywords first,
/// then devices, kinds, and the remaining categories; alphabetical within
/// each. `point` must be the draft's frontier.
std::vector<CompletionOption> options(const Draft& draft, const lang::InsertionPoint& point,
                                      const lang::Grammar& grammar, const home::RegistrySnapshot& registry);

/// Inserts an option. Literal options need `value`. Throws StaleOption when
/// the grammar changed since the option was computed.
DraftView apply_option(const Draft& draft, const lang::InsertionPoint& point, const CompletionOption& option,
                       const lang::Grammar& grammar, const std::optional<std::string>& value = std::nullopt);

/// Removes the node at point.path + [point.slot] and whatever depended on
/// it. The header (or the root) clears the draft; an empty draft is left as is.
DraftView delete_at(const Draft& draft, const lang::InsertionPoint& point, const lang::Grammar& grammar);

nlohmann::json to_json(const CompletionOption& o);
CompletionOption option_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DraftView& v);

}  // namespace tapkit::keyboard
