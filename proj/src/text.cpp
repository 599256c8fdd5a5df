#include "engage/text.hpp"

#include <algorithm>
#include <cctype>

namespace engage {

bool is_cjk(uint32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // CJK Unified Ideographs
           (cp >= 0x3400 && cp <= 0x4DBF) ||    // Extension A
           (cp >= 0x20000 && cp <= 0x2A6DF) ||  // Extension B
           (cp >= 0xF900 && cp <= 0xFAFF) ||    // Compatibility Ideographs
           (cp >= 0x3040 && cp <= 0x309F) ||    // Hiragana
           (cp >= 0x30A0 && cp <= 0x30FF) ||    // Katakana
           (cp >= 0xAC00 && cp <= 0xD7A3);      // Hangul Syllables
}

uint32_t decode_utf8(std::string_view s, size_t& i) {
    unsigned char c = s[i];
    if (c < 0x80) {
        ++i;
        return c;
    }
    int len;
    uint32_t cp;
    if ((c & 0xE0) == 0xC0) {
        len = 2;
        cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
        len = 3;
        cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
        len = 4;
        cp = c & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char cc = s[i + k];
        if ((cc & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i += len;
    return cp;
}

namespace {

bool is_space_cp(uint32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
           cp == '\v' || cp == 0x3000 || cp == 0x00A0;
}

// Separators for similarity tokenization: whitespace plus common ASCII and
// CJK punctuation.
bool is_separator_cp(uint32_t cp) {
    if (is_space_cp(cp)) return true;
    if (cp < 0x80)
        return std::ispunct(static_cast<unsigned char>(cp)) != 0;
    return (cp >= 0x3001 && cp <= 0x303F) ||  // CJK punctuation
           (cp >= 0xFF01 && cp <= 0xFF0F) ||  // fullwidth punctuation
           (cp >= 0xFF1A && cp <= 0xFF20) ||
           (cp >= 0x2018 && cp <= 0x201F);    // curly quotes
}

void append_cp_utf8(std::string& out, uint32_t cp, std::string_view src,
                    size_t begin, size_t end) {
    (void)cp;
    out.append(src.substr(begin, end - begin));
}

}  // namespace

int word_count(std::string_view s) {
    int words = 0;
    bool in_run = false;
    size_t i = 0;
    while (i < s.size()) {
        uint32_t cp = decode_utf8(s, i);
        if (is_cjk(cp)) {
            ++words;
            in_run = false;
        } else if (is_space_cp(cp)) {
            in_run = false;
        } else {
            if (!in_run) ++words;
            in_run = true;
        }
    }
    return words;
}

std::unordered_set<std::string> similarity_tokens(std::string_view s) {
    std::unordered_set<std::string> out;
    std::string cur;
    size_t i = 0;
    while (i < s.size()) {
        size_t begin = i;
        uint32_t cp = decode_utf8(s, i);
        if (is_cjk(cp)) {
            if (!cur.empty()) {
                out.insert(cur);
                cur.clear();
            }
            std::string tok;
            append_cp_utf8(tok, cp, s, begin, i);
            out.insert(std::move(tok));
        } else if (is_separator_cp(cp)) {
            if (!cur.empty()) {
                out.insert(cur);
                cur.clear();
            }
        } else {
            if (cp < 0x80)
                cur += static_cast<char>(std::tolower(static_cast<unsigned char>(cp)));
            else
                append_cp_utf8(cur, cp, s, begin, i);
        }
    }
    if (!cur.empty()) out.insert(std::move(cur));
    return out;
}

double jaccard(const std::unordered_set<std::string>& a,
               const std::unordered_set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    size_t inter = 0;
    for (const auto& t : small)
        if (large.count(t)) ++inter;
    size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    if (needle.size() > haystack.size()) return false;
    auto lower = [](unsigned char c) { return std::tolower(c); };
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(),
                          needle.end(), [&](char a, char b) {
                              return lower(static_cast<unsigned char>(a)) ==
                                     lower(static_cast<unsigned char>(b));
                          });
    return it != haystack.end();
}

}  // namespace engage
