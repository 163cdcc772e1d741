// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace attnsent {

inline constexpr std::string_view kUrlToken = "urlObj";
inline constexpr std::string_view kPhoneToken = "phonenumObj";
inline constexpr std::string_view kMailToken = "mailObj";

/// NFC-normalizes, collapses whitespace and replaces e-mail addresses,
/// URLs and phone numbers with kMailToken, kUrlToken and kPhoneToken.
/// Casing is kept. Idempotent.
///
/// Whitespace runs become one space, or one '\n' when the run contains a
/// line break, so sentence boundaries survive. Leading and trailing
/// whitespace is dropped.
///
/// Recognized patterns:
///   e-mail  local@domain.tld
///   URL     http://, https:// or www. followed by non-space characters,
///           trailing punctuation excluded
///   phone   9-11 digits, optional +84 prefix, optional single space, dot
///           or dash between digits
std::string normalize(std::string_view text);

/// Splits on whitespace and detaches every punctuation character as its
/// own token. '_' is not punctuation, so pre-segmented words such as
/// "điện_thoại" stay whole. An empty result means the caller should drop
/// the document.
std::vector<std::string> tokenize(std::string_view text);

/// Sentences end at '\n' or at a run of '.', '!', '?' followed by
/// whitespace or end of text. Empty sentences are dropped.
std::vector<std::string> split_sentences(std::string_view text);

// UTF-8 to code points; invalid sequences decode to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view text);
std::string encode_utf8(const std::vector<char32_t>& codepoints);

}  // namespace attnsent
