#pragma once

// Text normalization shared by every stage: UTF-8 decoding, case folding,
// tokenization, normalized containment and sentence splitting.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace irrbench::text {

/// Decodes UTF-8. Invalid bytes are passed through as their Latin-1 code point.
inline std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len > 0 && i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (b & 0x3F);
            }
        }
        if (!ok) {
            out.push_back(b0);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string encode_utf8(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) append_utf8(out, cp);
    return out;
}

/// Simple case folding for Latin, Latin-1, Latin Extended-A, Greek and Cyrillic.
inline char32_t to_lower(char32_t c) {
    if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
    if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
    if (c >= 0x139 && c <= 0x148) return (c % 2 == 1) ? c + 1 : c;
    if (c >= 0x14A && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
    if (c == 0x178) return 0xFF;
    if (c >= 0x179 && c <= 0x17E) return (c % 2 == 1) ? c + 1 : c;
    if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
    if (c == 0x386) return 0x3AC;
    if (c >= 0x388 && c <= 0x38A) return c + 37;
    if (c == 0x38C) return 0x3CC;
    if (c == 0x38E || c == 0x38F) return c + 63;
    if (c >= 0x410 && c <= 0x42F) return c + 32;
    if (c >= 0x400 && c <= 0x40F) return c + 80;
    return c;
}

inline bool is_space(char32_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' ||
           c == 0xA0 || (c >= 0x2000 && c <= 0x200B) || c == 0x3000;
}

/// Letters and digits. Non-ASCII code points count as word characters unless
/// they fall in a punctuation or symbol block.
inline bool is_word_char(char32_t c) {
    if (c < 0x80) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    }
    if (c <= 0xBF) return false;
    if (c == 0xD7 || c == 0xF7) return false;
    if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, arrows, math, boxes
    if (c >= 0x2E00 && c <= 0x2E7F) return false;
    if (c >= 0x3000 && c <= 0x303F) return false;
    if (c >= 0xFE30 && c <= 0xFE4F) return false;
    if (c >= 0xFF01 && c <= 0xFF0F) return false;
    if (c >= 0xFF1A && c <= 0xFF20) return false;
    if (c >= 0xFF3B && c <= 0xFF40) return false;
    if (c >= 0xFF5B && c <= 0xFF65) return false;
    if (c == 0xFFFD || c == 0xFEFF) return false;
    return true;
}

inline std::string lowercase(std::string_view s) {
    auto cps = decode_utf8(s);
    for (auto& c : cps) c = to_lower(c);
    return encode_utf8(cps);
}

/// Lowercased word tokens; everything that is not a word character separates.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char32_t c : decode_utf8(s)) {
        if (is_word_char(c)) {
            append_utf8(cur, to_lower(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline std::string trim(std::string_view s) {
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_ws(s[b])) ++b;
    while (e > b && is_ws(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

/// Trims and collapses every whitespace run (including Unicode spaces) to one space.
inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char32_t c : decode_utf8(s)) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        append_utf8(out, c);
    }
    return out;
}

/// Form used for all case-insensitive, whitespace-insensitive comparisons.
inline std::string normalize_for_match(std::string_view s) {
    return collapse_whitespace(lowercase(s));
}

inline bool contains_normalized(std::string_view haystack, std::string_view needle) {
    auto n = normalize_for_match(needle);
    if (n.empty()) return false;
    return normalize_for_match(haystack).find(n) != std::string::npos;
}

inline bool contains_any_normalized(std::string_view haystack, std::span<const std::string> needles) {
    auto h = normalize_for_match(haystack);
    return std::any_of(needles.begin(), needles.end(), [&](const std::string& n) {
        auto nn = normalize_for_match(n);
        return !nn.empty() && h.find(nn) != std::string::npos;
    });
}

inline bool equals_normalized(std::string_view a, std::string_view b) {
    return normalize_for_match(a) == normalize_for_match(b);
}

/// Digest normalization for prompts: CRLF to LF, trailing whitespace removed
/// from every line, leading and trailing blank space removed.
inline std::string normalize_prompt(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::string line;
    auto flush_line = [&](bool newline) {
        auto e = line.find_last_not_of(" \t\r\f\v");
        line.erase(e == std::string::npos ? 0 : e + 1);
        out += line;
        if (newline) out.push_back('\n');
        line.clear();
    };
    for (char c : s) {
        if (c == '\n') {
            flush_line(true);
        } else {
            line.push_back(c);
        }
    }
    flush_line(false);
    return trim(out);
}

inline bool is_abbreviation(std::string_view word) {
    static constexpr std::array<std::string_view, 24> kAbbrev = {
        "mr", "mrs", "ms", "dr", "st", "jr", "sr", "prof", "gen", "col", "lt", "mt",
        "no", "vs", "etc", "inc", "ltd", "co", "corp", "jan", "feb", "aug", "sept", "oct"};
    if (word.empty()) return false;
    if (word.find('.') != std::string_view::npos) return true;  // U.S, e.g
    auto cps = decode_utf8(word);
    if (cps.size() == 1) return true;  // initials such as "J."
    auto low = lowercase(word);
    return std::find(kAbbrev.begin(), kAbbrev.end(), low) != kAbbrev.end();
}

/// Splits prose into sentences. A boundary is '.', '!' or '?' followed by
/// whitespace and an upper-case letter, digit or quote, unless the preceding
/// word looks like an abbreviation or initial.
inline std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t j = i + 1;
        while (j < s.size() && (s[j] == '"' || s[j] == '\'' || s[j] == ')')) ++j;
        if (j < s.size() && !(s[j] == ' ' || s[j] == '\n' || s[j] == '\t')) continue;
        std::size_t k = j;
        while (k < s.size() && (s[k] == ' ' || s[k] == '\n' || s[k] == '\t')) ++k;
        if (k < s.size()) {
            auto nc = static_cast<unsigned char>(s[k]);
            bool starts_sentence = (nc >= 'A' && nc <= 'Z') || (nc >= '0' && nc <= '9') || nc == '"' ||
                                   nc == '\'' || nc >= 0x80;
            if (!starts_sentence) continue;
        }
        if (c == '.') {
            std::size_t w = i;
            while (w > start && s[w - 1] != ' ' && s[w - 1] != '\n' && s[w - 1] != '\t' && s[w - 1] != '(') --w;
            if (is_abbreviation(s.substr(w, i - w))) continue;
        }
        auto sentence = trim(s.substr(start, j - start));
        if (!sentence.empty()) out.push_back(std::move(sentence));
        start = j;
    }
    auto tail = trim(s.substr(std::min(start, s.size())));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

/// Truncates to a whole number of code points, backing off to the last space.
inline std::string truncate_chars(std::string_view s, std::size_t max_chars) {
    auto cps = decode_utf8(s);
    if (cps.size() <= max_chars) return std::string(s);
    std::size_t cut = max_chars;
    std::size_t back = cut;
    while (back > 0 && !is_space(cps[back])) --back;
    if (back > 0) cut = back;
    return trim(encode_utf8(std::u32string_view(cps).substr(0, cut)));
}

/// First `max_sentences` sentences or `max_chars` characters, whichever is shorter.
inline std::string leading_excerpt(std::string_view s, std::size_t max_sentences, std::size_t max_chars) {
    auto sentences = split_sentences(s);
    std::string joined;
    for (std::size_t i = 0; i < sentences.size() && i < max_sentences; ++i) {
        if (!joined.empty()) joined.push_back(' ');
        joined += sentences[i];
    }
    return truncate_chars(joined, max_chars);
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char a = s[i];
        char b = prefix[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a + 32);
        if (b >= 'A' && b <= 'Z') b = static_cast<char>(b + 32);
        if (a != b) return false;
    }
    return true;
}

inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(s.substr(start));
            break;
        }
        lines.emplace_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

}  // namespace irrbench::text
