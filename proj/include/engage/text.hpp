#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace engage {

// CJK ideographs, kana and hangul: scripts written without word spacing,
// counted one word per character.
bool is_cjk(uint32_t cp);

// Decodes one UTF-8 code point at `i`, advancing `i`. Invalid bytes decode
// as U+FFFD and advance by one.
uint32_t decode_utf8(std::string_view s, size_t& i);

// Words = whitespace-delimited runs of non-CJK text, plus one word per CJK
// character. An empty or all-whitespace string counts 0.
int word_count(std::string_view s);

// Token set for lexical similarity: ASCII-lowercased, split on whitespace
// and punctuation, CJK per character.
std::unordered_set<std::string> similarity_tokens(std::string_view s);

// Jaccard index of the two token sets. Both empty -> 1.0, exactly one
// empty -> 0.0.
double jaccard(const std::unordered_set<std::string>& a,
               const std::unordered_set<std::string>& b);

std::string to_lower_ascii(std::string_view s);

// Case-insensitive (ASCII folding) substring test.
bool contains_ci(std::string_view haystack, std::string_view needle);

}  // namespace engage
