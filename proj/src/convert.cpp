#include "corral/repair.hpp"

#include <charconv>
#include <cmath>

namespace corral {

namespace {

auto is_space(char c) -> bool { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
auto is_digit(char c) -> bool { return c >= '0' && c <= '9'; }

auto strip_prefix(std::string_view& s, std::string_view prefix) -> bool {
    if (s.substr(0, prefix.size()) != prefix) return false;
    s.remove_prefix(prefix.size());
    return true;
}

auto strip_currency(std::string_view& s) -> bool {
    return strip_prefix(s, "$") || strip_prefix(s, "\xE2\x82\xAC") || strip_prefix(s, "\xC2\xA3");
}

}  // namespace

auto convert_numeric_string(std::string_view text) -> std::optional<double> {
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);

    // The sign may sit on either side of the currency symbol: "$-5", "-$5".
    bool negative = false;
    bool signed_already = false;
    auto take_sign = [&] {
        if (!signed_already && !text.empty() && (text.front() == '-' || text.front() == '+')) {
            negative = text.front() == '-';
            signed_already = true;
            text.remove_prefix(1);
        }
    };
    take_sign();
    strip_currency(text);
    take_sign();

    std::string digits;
    std::size_t i = 0;
    std::size_t run = 0;
    bool grouped = false;
    while (i < text.size() && (is_digit(text[i]) || text[i] == ',')) {
        if (text[i] == ',') {
            // Thousands groups: a 1-3 digit lead, then exactly three per group.
            if (run == 0 || (!grouped && run > 3) || (grouped && run != 3)) return std::nullopt;
            grouped = true;
            run = 0;
        } else {
            digits.push_back(text[i]);
            ++run;
        }
        ++i;
    }
    if (grouped && run != 3) return std::nullopt;
    const bool has_int = !digits.empty();

    bool has_frac = false;
    if (i < text.size() && text[i] == '.') {
        digits.push_back('.');
        ++i;
        while (i < text.size() && is_digit(text[i])) {
            digits.push_back(text[i]);
            has_frac = true;
            ++i;
        }
    }
    if (!has_int && !has_frac) return std::nullopt;

    int exponent = 0;
    if (i < text.size()) {
        switch (text[i]) {
            case 'k': case 'K': exponent = 3; break;
            case 'm': case 'M': exponent = 6; break;
            case 'b': case 'B': exponent = 9; break;
            default: return std::nullopt;
        }
        ++i;
    }
    if (i != text.size()) return std::nullopt;

    // Scale via the decimal exponent so "1.1k" parses to exactly 1100.
    std::string literal = (negative ? "-" : "") + digits + "e" + std::to_string(exponent);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), value);
    if (ec != std::errc{} || ptr != literal.data() + literal.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

}  // namespace corral
