#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace capstext::datapipe {

// Cleans one raw comment: strips emoji/pictographic codepoints, decimal
// digits (ASCII, Arabic-Indic and Extended Arabic-Indic), URL tokens
// (scheme:// or www.-prefixed runs), collapses whitespace and trims.
// Returns nullopt when nothing is left (the record is dropped).
// Codepoint stripping runs before URL matching so that a second pass is a
// no-op (normalize is idempotent).
// Throws InputError on invalid UTF-8.
std::optional<std::string> normalize(std::string_view raw);

// Strict UTF-8 decode helpers shared with the corpus loader.
bool is_valid_utf8(std::string_view text);

}  // namespace capstext::datapipe
