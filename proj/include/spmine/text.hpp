#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spmine::text {

// ASCII lowercase; bytes outside ASCII are left untouched so UTF-8 survives.
std::string to_lower(std::string_view s);

std::string_view trim(std::string_view s);

// Trim and collapse every run of whitespace to a single space.
std::string collapse_whitespace(std::string_view s);

// Lowercase + collapsed whitespace. Used for dedup keys, issue strings and theme names.
std::string normalize(std::string_view s);

// Lowercase tokens split on runs of non-word characters. ASCII letters/digits and
// non-punctuation code points above U+00BF count as word characters, so accented
// letters and non-Latin scripts stay inside their tokens.
std::vector<std::string> word_tokens(std::string_view s);

// Lowercase tokens split on whitespace only (text-generation metrics).
std::vector<std::string> whitespace_tokens(std::string_view s);

std::vector<std::string> split(std::string_view s, char delimiter);

std::string join(const std::vector<std::string>& parts, std::string_view separator);

bool starts_with_icase(std::string_view s, std::string_view prefix);

}  // namespace spmine::text
