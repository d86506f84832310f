#pragma once

#include <string>
#include <string_view>

namespace pgnet::uni {

// Strict UTF-8 decode; rejects overlong forms, surrogates, and values
// above U+10FFFF. Throws EncodingError with the offending byte offset.
std::u32string decode_utf8(std::string_view text);

std::string encode_utf8(std::u32string_view codepoints);

// Canonical composition (NFC): full canonical decomposition, canonical
// reordering, then primary composition. Hangul is handled algorithmically.
std::u32string nfc(std::u32string_view codepoints);

unsigned char combining_class(char32_t cp);

// True for Cf format controls (ZWJ, ZWNJ, ZWSP, BOM, soft hyphen, ...).
bool is_format_control(char32_t cp);

// True for C0/C1 controls.
bool is_control(char32_t cp);

// Whitespace for collapsing: ASCII whitespace, NEL, NBSP, and the
// Unicode Z categories.
bool is_space(char32_t cp);

inline constexpr char32_t kZwnj = 0x200C;
inline constexpr char32_t kZwj = 0x200D;
inline constexpr char32_t kBengaliVirama = 0x09CD;

}  // namespace pgnet::uni
