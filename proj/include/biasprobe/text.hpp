#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace biasprobe {

std::string to_lower(std::string_view s);

// Uppercases the first letter only; apostrophes and the rest stay untouched
// ("she's" -> "She's"). ASCII-only; non-ASCII leading bytes pass through.
std::string capitalize_first(std::string_view s);

// Word tokens: maximal runs of ASCII letters, apostrophes kept when flanked
// by letters ("she's" is one token, trailing apostrophes are dropped).
// Digits and punctuation act as separators.
std::vector<std::string> word_tokens(std::string_view text);

// Jaccard similarity of the lowercase word-token sets of two sentences.
// Two token-less strings compare equal (1.0).
double jaccard_token_similarity(std::string_view a, std::string_view b);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep); // keeps empty fields

// Shortest of %.9g; used for CSV and SVG numeric fields.
std::string format_g9(double v);

std::string xml_escape(std::string_view s);

} // namespace biasprobe
