#include "cner/unicode.hpp"

#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utext.h>
#include <unicode/utf8.h>

#include <memory>

#include "cner/error.hpp"

namespace cner::unicode {

namespace {

icu::BreakIterator& character_iterator() {
  // BreakIterator is not thread-safe; one instance per thread.
  thread_local std::unique_ptr<icu::BreakIterator> it = [] {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> bi(
        icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(), status));
    if (U_FAILURE(status)) throw InternalError("ICU character break iterator unavailable");
    return bi;
  }();
  return *it;
}

}  // namespace

std::string nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw InternalError("ICU NFC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  if (norm->isNormalized(src, status) && U_SUCCESS(status)) {
    std::string out;
    src.toUTF8String(out);
    return out;
  }
  status = U_ZERO_ERROR;
  icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

std::vector<std::string_view> graphemes(std::string_view utf8) {
  std::vector<std::string_view> out;
  if (utf8.empty()) return out;
  UErrorCode status = U_ZERO_ERROR;
  UText* text = utext_openUTF8(nullptr, utf8.data(), static_cast<int64_t>(utf8.size()), &status);
  if (U_FAILURE(status)) throw DataError("cannot open UTF-8 text for segmentation");
  icu::BreakIterator& it = character_iterator();
  it.setText(text, status);
  if (U_FAILURE(status)) {
    utext_close(text);
    throw DataError("cannot segment text into graphemes");
  }
  // UText over UTF-8 reports native (byte) indices.
  int32_t start = it.first();
  for (int32_t end = it.next(); end != icu::BreakIterator::DONE; start = end, end = it.next()) {
    out.emplace_back(utf8.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(end - start)));
  }
  utext_close(text);
  return out;
}

std::string suffix(std::string_view word, std::size_t n) {
  auto g = graphemes(word);
  if (n >= g.size()) return std::string(word);
  const char* begin = g[g.size() - n].data();
  return std::string(begin, word.data() + word.size());
}

std::string prefix(std::string_view word, std::size_t n) {
  auto g = graphemes(word);
  if (n >= g.size()) return std::string(word);
  return std::string(word.data(), g[n].data());
}

std::u32string to_code_points(std::string_view utf8) {
  std::u32string out;
  int32_t i = 0;
  const auto len = static_cast<int32_t>(utf8.size());
  const auto* s = reinterpret_cast<const uint8_t*>(utf8.data());
  while (i < len) {
    UChar32 c;
    U8_NEXT(s, i, len, c);
    out.push_back(c < 0 ? U'�' : static_cast<char32_t>(c));
  }
  return out;
}

bool is_digit_token(std::string_view word) {
  if (word.empty()) return false;
  for (char32_t c : to_code_points(word)) {
    bool ascii = c >= U'0' && c <= U'9';
    bool bangla = c >= U'০' && c <= U'৯';
    if (!ascii && !bangla) return false;
  }
  return true;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace cner::unicode
