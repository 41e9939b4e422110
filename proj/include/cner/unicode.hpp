#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cner::unicode {

/// NFC-normalizes a UTF-8 string. Invalid sequences are replaced by U+FFFD.
std::string nfc(std::string_view utf8);

/// Splits a UTF-8 string into extended grapheme clusters.
std::vector<std::string_view> graphemes(std::string_view utf8);

/// Last min(n, #clusters) grapheme clusters.
std::string suffix(std::string_view word, std::size_t n);
/// First min(n, #clusters) grapheme clusters.
std::string prefix(std::string_view word, std::size_t n);

/// True iff the word is non-empty and consists of ASCII or Bangla decimal digits.
bool is_digit_token(std::string_view word);

std::string ascii_lower(std::string_view s);

/// Decodes UTF-8 to code points; invalid bytes become U+FFFD.
std::u32string to_code_points(std::string_view utf8);

}  // namespace cner::unicode
