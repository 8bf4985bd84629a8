#include "capstext/normalize.hpp"

#include <cstdint>
#include <vector>

#include "capstext/error.hpp"

namespace capstext::datapipe {

namespace {

// Returns the number of bytes consumed, or 0 on invalid input. Rejects
// overlong encodings, surrogates and codepoints above U+10FFFF.
std::size_t decode_utf8(std::string_view text, std::size_t pos, char32_t& out) {
  const auto byte = [&](std::size_t i) -> std::uint8_t {
    return static_cast<std::uint8_t>(text[i]);
  };
  const std::uint8_t b0 = byte(pos);
  if (b0 < 0x80) {
    out = b0;
    return 1;
  }
  const auto continuation = [&](std::size_t i) {
    return i < text.size() && (byte(i) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0) {
    if (!continuation(pos + 1)) return 0;
    const char32_t cp = ((b0 & 0x1Fu) << 6) | (byte(pos + 1) & 0x3Fu);
    if (cp < 0x80) return 0;
    out = cp;
    return 2;
  }
  if ((b0 & 0xF0) == 0xE0) {
    if (!continuation(pos + 1) || !continuation(pos + 2)) return 0;
    const char32_t cp = ((b0 & 0x0Fu) << 12) | ((byte(pos + 1) & 0x3Fu) << 6) |
                        (byte(pos + 2) & 0x3Fu);
    if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    out = cp;
    return 3;
  }
  if ((b0 & 0xF8) == 0xF0) {
    if (!continuation(pos + 1) || !continuation(pos + 2) || !continuation(pos + 3)) {
      return 0;
    }
    const char32_t cp = ((b0 & 0x07u) << 18) | ((byte(pos + 1) & 0x3Fu) << 12) |
                        ((byte(pos + 2) & 0x3Fu) << 6) | (byte(pos + 3) & 0x3Fu);
    if (cp < 0x10000 || cp > 0x10FFFF) return 0;
    out = cp;
    return 4;
  }
  return 0;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_removable_digit(char32_t cp) {
  return (cp >= '0' && cp <= '9') ||        // ASCII
         (cp >= 0x0660 && cp <= 0x0669) ||  // Arabic-Indic
         (cp >= 0x06F0 && cp <= 0x06F9);    // Extended Arabic-Indic
}

bool is_pictographic(char32_t cp) {
  // Emoji / pictographic blocks, variation selectors and the emoji joiner.
  return (cp >= 0x1F000 && cp <= 0x1FFFF) ||  // plane-1 symbol blocks
         (cp >= 0x2600 && cp <= 0x26FF) ||    // miscellaneous symbols
         (cp >= 0x2700 && cp <= 0x27BF) ||    // dingbats
         (cp >= 0x2B00 && cp <= 0x2BFF) ||    // arrows, stars, squares
         cp == 0x2B50 || cp == 0x2B55 ||
         cp == 0xFE0E || cp == 0xFE0F ||      // variation selectors
         cp == 0x200D ||                      // zero-width joiner
         cp == 0x20E3;                        // combining keycap
}

bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
         cp == '\v';
}

char32_t ascii_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  return cp;
}

bool is_url_run(const std::vector<char32_t>& run) {
  // www.-prefixed
  if (run.size() >= 4 && ascii_lower(run[0]) == 'w' && ascii_lower(run[1]) == 'w' &&
      ascii_lower(run[2]) == 'w' && run[3] == '.') {
    return true;
  }
  // scheme:// where scheme is [A-Za-z][A-Za-z0-9+.-]*
  const char32_t first = ascii_lower(run.empty() ? U' ' : run[0]);
  if (first < 'a' || first > 'z') return false;
  std::size_t i = 1;
  while (i < run.size()) {
    const char32_t c = ascii_lower(run[i]);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' || c == '.' ||
        c == '-') {
      ++i;
      continue;
    }
    break;
  }
  return i + 2 < run.size() && run[i] == ':' && run[i + 1] == '/' && run[i + 2] == '/';
}

}  // namespace

bool is_valid_utf8(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = 0;
    const std::size_t used = decode_utf8(text, pos, cp);
    if (used == 0) return false;
    pos += used;
  }
  return true;
}

std::optional<std::string> normalize(std::string_view raw) {
  std::vector<char32_t> codepoints;
  codepoints.reserve(raw.size());
  std::size_t pos = 0;
  while (pos < raw.size()) {
    char32_t cp = 0;
    const std::size_t used = decode_utf8(raw, pos, cp);
    if (used == 0) {
      throw InputError("normalize: invalid UTF-8 at byte offset " + std::to_string(pos));
    }
    pos += used;
    if (is_removable_digit(cp) || is_pictographic(cp)) continue;
    codepoints.push_back(cp);
  }

  // Split into whitespace-delimited runs, dropping URL runs.
  std::string out;
  std::vector<char32_t> run;
  const auto flush = [&]() {
    if (run.empty()) return;
    if (!is_url_run(run)) {
      if (!out.empty()) out.push_back(' ');
      for (char32_t cp : run) encode_utf8(cp, out);
    }
    run.clear();
  };
  for (char32_t cp : codepoints) {
    if (is_space(cp)) {
      flush();
    } else {
      run.push_back(cp);
    }
  }
  flush();

  if (out.empty()) return std::nullopt;
  return out;
}

}  // namespace capstext::datapipe
