#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace statuary {

/// One decoded code point and its encoded length; nullopt cp marks an invalid sequence
/// (length is then 1, so callers can skip the bad byte).
struct Utf8Step {
  std::optional<char32_t> cp;
  std::size_t length = 1;
};

[[nodiscard]] inline auto utf8_step(std::string_view s, std::size_t pos) -> Utf8Step {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    return {b0, 1};
  }
  std::size_t len = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return {std::nullopt, 1};
  }
  if (pos + len > s.size()) {
    return {std::nullopt, 1};
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) {
      return {std::nullopt, 1};
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    return {std::nullopt, 1};
  }
  return {cp, len};
}

[[nodiscard]] inline auto is_valid_utf8(std::string_view s) -> bool {
  for (std::size_t pos = 0; pos < s.size();) {
    const auto step = utf8_step(s, pos);
    if (!step.cp) {
      return false;
    }
    pos += step.length;
  }
  return true;
}

/// Replaces every invalid byte with U+FFFD.
[[nodiscard]] inline auto sanitize_utf8(std::string_view s) -> std::string {
  std::string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) {
    const auto step = utf8_step(s, pos);
    if (step.cp) {
      out.append(s.substr(pos, step.length));
    } else {
      out.append("\xEF\xBF\xBD");
    }
    pos += step.length;
  }
  return out;
}

/// Han, kana, hangul and CJK punctuation-free letter blocks.
[[nodiscard]] constexpr auto is_cjk(char32_t cp) -> bool {
  return (cp >= 0x3040 && cp <= 0x30FF) ||    // hiragana, katakana
         (cp >= 0x3400 && cp <= 0x4DBF) ||    // CJK ext A
         (cp >= 0x4E00 && cp <= 0x9FFF) ||    // CJK unified
         (cp >= 0xAC00 && cp <= 0xD7AF) ||    // hangul syllables
         (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
         (cp >= 0x31F0 && cp <= 0x31FF) ||    // katakana phonetic ext
         (cp >= 0x20000 && cp <= 0x2FA1F);    // CJK ext B..F, supplement
}

}  // namespace statuary
