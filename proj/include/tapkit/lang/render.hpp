#pragma once

#include "tapkit/lang/ast.hpp"
#include "tapkit/lang/grammar.hpp"
#include "tapkit/lang/tokens.hpp"

namespace tapkit::lang {

inline constexpr std::string_view kUnknownDisplay = "Unknown";

/// Token sentence for a program. References the grammar cannot name are
/// flagged unknown; their text keeps the last-known name so a permissive
/// grammar can still read it back.
TokenSentence render(const Program& program, const Grammar& grammar);

/// Canonical source text (render(...).text()).
std::string render_text(const Program& program, const Grammar& grammar);

}  // namespace tapkit::lang
