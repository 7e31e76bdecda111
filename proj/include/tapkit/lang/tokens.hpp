#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/common.hpp"
#include "tapkit/home/value.hpp"

namespace tapkit::lang {

enum class TokenCategory {
  kKeyword,
  kAction,
  kEvent,
  kDevice,
  kKind,
  kLocation,
  kProperty,
  kVariable,
  kValue,
  kNumber,
  kProgram,
};

std::string_view to_string(TokenCategory c);
TokenCategory token_category_from_string(std::string_view s);

/// One displayed unit of a program sentence.
struct Token {
  std::string text;     // canonical source text (one or more words)
  std::string display;  // what an editor shows; differs for Unknown references
  TokenCategory category = TokenCategory::kKeyword;
  AstPath path;
  bool unknown = false;
  std::string suffix;  // punctuation glued to the text, e.g. ":" after the program name

  bool operator==(const Token&) const = default;
};

struct TokenSentence {
  std::vector<Token> tokens;

  /// Canonical source text: token texts joined by single spaces.
  std::string text() const;
  bool operator==(const TokenSentence&) const = default;
};

/// Kinds of free-form terminals. Everything else is a fixed phrase.
enum class LiteralClass {
  kNone,
  kValue,    // a literal of `domain`
  kName,     // a program name in the header
  kCount,    // a positive wait amount
  kWord,     // any single word (permissive loading grammar only)
};

/// A terminal of the derived grammar. Fixed phrases carry their text;
/// literal classes carry a placeholder text such as "<int[1..6]>".
struct Terminal {
  TokenCategory category = TokenCategory::kKeyword;
  std::string text;
  LiteralClass literal = LiteralClass::kNone;
  std::optional<home::Domain> domain;

  bool is_literal() const { return literal != LiteralClass::kNone; }
  /// A concrete word accepted by this terminal (the text itself for phrases).
  std::string representative() const;
  /// Identity used for set comparisons.
  std::pair<TokenCategory, std::string> key() const { return {category, text}; }

  bool operator==(const Terminal& o) const { return key() == o.key(); }
  bool operator<(const Terminal& o) const { return key() < o.key(); }
};

/// Where the next token goes: the path of the innermost open node and the
/// child slot being filled.
struct InsertionPoint {
  AstPath path;
  int slot = 0;

  bool operator==(const InsertionPoint&) const = default;
};

nlohmann::json to_json(const Token& t);
Token token_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Terminal& t);
nlohmann::json to_json(const InsertionPoint& p);
InsertionPoint insertion_point_from_json(const nlohmann::json& j);

}  // namespace tapkit::lang
