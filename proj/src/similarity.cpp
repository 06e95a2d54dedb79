#include "corral/repair.hpp"

#include <algorithm>
#include <cctype>

namespace corral {

namespace {

auto decode_utf8(std::string_view s) -> std::u32string {
    std::u32string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        auto c = static_cast<unsigned char>(s[i]);
        char32_t cp = c;
        std::size_t len = 1;
        if (c >= 0xF0) {
            cp = c & 0x07;
            len = 4;
        } else if (c >= 0xE0) {
            cp = c & 0x0F;
            len = 3;
        } else if (c >= 0xC0) {
            cp = c & 0x1F;
            len = 2;
        }
        if (i + len > s.size()) len = 1, cp = c;
        for (std::size_t k = 1; k < len; ++k) {
            cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

auto is_ascii_punct(char32_t c) -> bool { return c < 0x80 && std::ispunct(static_cast<int>(c)); }
auto is_ascii_upper(char32_t c) -> bool { return c >= 'A' && c <= 'Z'; }
auto is_ascii_space(char32_t c) -> bool { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
auto fold(char32_t c) -> char32_t { return is_ascii_upper(c) ? c + ('a' - 'A') : c; }

auto normalize(std::string_view s) -> std::u32string {
    std::u32string out;
    for (char32_t c : decode_utf8(s)) {
        if (!is_ascii_punct(c)) out.push_back(fold(c));
    }
    return out;
}

auto levenshtein(const std::u32string& a, const std::u32string& b) -> std::size_t {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// `abbrev` is "USA"-like: no whitespace and at least two capitals. Its
// capitals must spell the initials of `phrase`'s words, either of every word
// or of the capitalized words only (so "of" in "United States of America"
// can be skipped).
auto initialism_of(const std::u32string& abbrev, const std::u32string& phrase) -> bool {
    std::u32string caps;
    for (char32_t c : abbrev) {
        if (is_ascii_space(c)) return false;
        if (is_ascii_upper(c)) caps.push_back(fold(c));
    }
    if (caps.size() < 2) return false;

    std::u32string all_initials;
    std::u32string capital_initials;
    bool at_word_start = true;
    for (char32_t c : phrase) {
        if (is_ascii_space(c)) {
            at_word_start = true;
            continue;
        }
        if (at_word_start) {
            all_initials.push_back(fold(c));
            if (is_ascii_upper(c)) capital_initials.push_back(fold(c));
            at_word_start = false;
        }
    }
    if (all_initials.size() < 2) return false;
    return caps == all_initials || caps == capital_initials;
}

}  // namespace

auto key_similarity(std::string_view a, std::string_view b) -> double {
    const auto ra = decode_utf8(a);
    const auto rb = decode_utf8(b);
    if (ra.size() <= rb.size() && initialism_of(ra, rb)) return 1.0;
    if (rb.size() <= ra.size() && initialism_of(rb, ra)) return 1.0;

    const auto na = normalize(a);
    const auto nb = normalize(b);
    const std::size_t longest = std::max(na.size(), nb.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(na, nb)) / static_cast<double>(longest);
}

auto suggest_merge_target(const Group& small, std::span<const Group> candidates,
                          double min_similarity, const SimilarityFn& similarity)
    -> std::optional<Group> {
    if (!small.key) return std::nullopt;
    const Group* best = nullptr;
    double best_score = -1.0;
    for (const auto& c : candidates) {
        if (!c.key || c.key == small.key) continue;
        const double score =
            similarity ? similarity(*small.key, *c.key) : key_similarity(*small.key, *c.key);
        if (score < min_similarity) continue;
        bool better = false;
        if (best == nullptr || score > best_score) {
            better = true;
        } else if (score == best_score) {
            if (c.rows.size() != best->rows.size()) {
                better = c.rows.size() > best->rows.size();
            } else {
                better = *c.key < *best->key;
            }
        }
        if (better) {
            best = &c;
            best_score = score;
        }
    }
    if (best == nullptr) return std::nullopt;
    return *best;
}

}  // namespace corral
