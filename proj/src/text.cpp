// SPDX-License-Identifier: Apache-2.0
#include "attnsent/text.hpp"

#include <regex>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "attnsent/errors.hpp"

namespace attnsent {

namespace {

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw DataError(std::string("ICU NFC unavailable: ") + u_errorName(status));
  const icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  const icu::UnicodeString dst = normalizer->normalize(src, status);
  if (U_FAILURE(status)) throw DataError(std::string("NFC normalization failed: ") + u_errorName(status));
  std::string out;
  dst.toUTF8String(out);
  return out;
}

bool is_line_break(char32_t c) { return c == U'\n' || c == U'\r' || c == 0x2028 || c == 0x2029; }

bool is_space(char32_t c) {
  return is_line_break(c) || u_isUWhiteSpace(static_cast<UChar32>(c)) != 0;
}

std::string collapse_whitespace(std::string_view text) {
  const std::vector<char32_t> cps = decode_utf8(text);
  std::vector<char32_t> out;
  out.reserve(cps.size());
  std::size_t i = 0;
  while (i < cps.size()) {
    if (!is_space(cps[i])) {
      out.push_back(cps[i++]);
      continue;
    }
    bool has_break = false;
    while (i < cps.size() && is_space(cps[i])) has_break |= is_line_break(cps[i++]);
    if (!out.empty() && i < cps.size()) out.push_back(has_break ? U'\n' : U' ');
  }
  return encode_utf8(out);
}

const std::regex& email_pattern() {
  static const std::regex re(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,})");
  return re;
}

const std::regex& url_pattern() {
  static const std::regex re(R"((?:[Hh][Tt][Tt][Pp][Ss]?://|[Ww][Ww][Ww]\.)[^\s]*[^\s.,!?;:)\]'"])");
  return re;
}

const std::regex& phone_pattern() {
  static const std::regex re(R"((^|[^0-9A-Za-z+])((?:\+84[ .-]?)?[0-9](?:[ .-]?[0-9]){8,10})(?![0-9]))");
  return re;
}

bool is_token_punct(char32_t c) {
  return c != U'_' && u_ispunct(static_cast<UChar32>(c)) != 0;
}

}  // namespace

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    out.push_back(c < 0 ? char32_t{0xFFFD} : static_cast<char32_t>(c));
  }
  return out;
}

std::string encode_utf8(const std::vector<char32_t>& codepoints) {
  std::string out;
  out.reserve(codepoints.size());
  for (char32_t c : codepoints) {
    uint8_t buf[4];
    int32_t len = 0;
    UBool error = false;
    U8_APPEND(buf, len, 4, static_cast<UChar32>(c), error);
    if (error) {
      len = 0;
      U8_APPEND_UNSAFE(buf, len, 0xFFFD);
    }
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
  }
  return out;
}

std::string normalize(std::string_view text) {
  std::string s = collapse_whitespace(nfc(text));
  s = std::regex_replace(s, email_pattern(), std::string(kMailToken));
  s = std::regex_replace(s, url_pattern(), std::string(kUrlToken));
  s = std::regex_replace(s, phone_pattern(), "$1" + std::string(kPhoneToken));
  return s;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<char32_t> current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(encode_utf8(current));
    current.clear();
  };
  for (char32_t c : decode_utf8(text)) {
    if (is_space(c)) {
      flush();
    } else if (is_token_punct(c)) {
      flush();
      tokens.push_back(encode_utf8({c}));
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> split_sentences(std::string_view text) {
  const std::vector<char32_t> cps = decode_utf8(text);
  std::vector<std::string> sentences;
  std::vector<char32_t> current;
  auto flush = [&] {
    std::size_t b = 0, e = current.size();
    while (b < e && is_space(current[b])) ++b;
    while (e > b && is_space(current[e - 1])) --e;
    if (b < e) sentences.push_back(encode_utf8({current.begin() + static_cast<std::ptrdiff_t>(b),
                                                current.begin() + static_cast<std::ptrdiff_t>(e)}));
    current.clear();
  };
  auto terminal = [](char32_t c) { return c == U'.' || c == U'!' || c == U'?'; };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (is_line_break(c)) {
      flush();
      continue;
    }
    current.push_back(c);
    if (terminal(c) && (i + 1 == cps.size() || (!terminal(cps[i + 1]) && is_space(cps[i + 1])))) {
      flush();
    }
  }
  flush();
  return sentences;
}

}  // namespace attnsent
