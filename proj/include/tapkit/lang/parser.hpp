#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tapkit/lang/ast.hpp"
#include "tapkit/lang/grammar.hpp"
#include "tapkit/lang/tokens.hpp"

namespace tapkit::lang {

/// Parse failure with the offending character offset and the terminals
/// that would have been accepted there.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::vector<Terminal> expected, std::string found);

  std::size_t position() const { return position_; }
  const std::vector<Terminal>& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::size_t position_;
  std::vector<Terminal> expected_;
  std::string found_;
};

struct ParseOutcome {
  enum class Status { kComplete, kIncomplete, kError };

  Status status = Status::kError;
  std::optional<Program> program;  // set when complete
  TokenSentence tokens;            // everything consumed before the end or the error
  std::vector<Terminal> matched;   // the terminal each token was read as
  /// Complete or incomplete: every terminal that may follow. Error: the
  /// terminals expected at the error position.
  std::vector<Terminal> expected;
  InsertionPoint frontier;  // where the next token goes (not meaningful on error)
  std::size_t error_position = 0;
  std::string found;

  bool valid_prefix() const { return status != Status::kError; }
};

/// Word-level lexing: whitespace separated, parentheses split off, a
/// trailing ':' kept as a suffix.
struct Word {
  std::string text;
  std::size_t offset = 0;
  std::string suffix;
};
std::vector<Word> lex(std::string_view text);

ParseOutcome parse_prefix(std::string_view text, const Grammar& grammar, const std::string& program_id = {});
ParseOutcome parse_tokens(const std::vector<std::string>& token_texts, const Grammar& grammar);

/// Parses a complete program. Throws SyntaxError.
Program parse(std::string_view text, const Grammar& grammar, const std::string& program_id = {});

/// Whether `word` is an instance of `terminal` (exact text, or a member of
/// the literal class).
bool accepts(const Terminal& terminal, std::string_view word);

}  // namespace tapkit::lang
