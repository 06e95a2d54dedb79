#include "corral/rule.hpp"

#include "corral/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

namespace corral {

auto cmp_op_symbol(CmpOp op) -> std::string_view {
    switch (op) {
        case CmpOp::Less: return "<";
        case CmpOp::LessEqual: return "<=";
        case CmpOp::Greater: return ">";
        case CmpOp::GreaterEqual: return ">=";
        case CmpOp::Equal: return "==";
        case CmpOp::NotEqual: return "!=";
    }
    return "?";
}

auto make_rule(RuleExpr::Node node) -> RulePtr {
    return std::make_shared<const RuleExpr>(std::move(node));
}

namespace {

enum class Tok { End, Number, Ident, LParen, RParen, Cmp, Invalid };

struct Token {
    Tok kind = Tok::End;
    std::size_t pos = 0;
    std::string_view text;
    double number = 0.0;
    CmpOp op = CmpOp::Less;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    auto next() -> Token {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        Token t;
        t.pos = pos_;
        if (pos_ >= src_.size()) return t;
        const char ch = src_[pos_];
        auto is_digit = [&](std::size_t k) {
            return k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]));
        };
        if (ch == '(' || ch == ')') {
            t.kind = ch == '(' ? Tok::LParen : Tok::RParen;
            t.text = src_.substr(pos_++, 1);
            return t;
        }
        if (ch == '<' || ch == '>' || ch == '=' || ch == '!') {
            const bool eq = pos_ + 1 < src_.size() && src_[pos_ + 1] == '=';
            t.kind = Tok::Cmp;
            if (ch == '<') {
                t.op = eq ? CmpOp::LessEqual : CmpOp::Less;
            } else if (ch == '>') {
                t.op = eq ? CmpOp::GreaterEqual : CmpOp::Greater;
            } else if (eq) {
                t.op = ch == '=' ? CmpOp::Equal : CmpOp::NotEqual;
            } else {
                t.kind = Tok::Invalid;
            }
            const std::size_t len = (eq ? 2 : 1);
            t.text = src_.substr(pos_, len);
            pos_ += len;
            return t;
        }
        const bool starts_number =
            is_digit(pos_) || (ch == '.' && is_digit(pos_ + 1)) ||
            (ch == '-' && (is_digit(pos_ + 1) ||
                           (pos_ + 1 < src_.size() && src_[pos_ + 1] == '.' && is_digit(pos_ + 2))));
        if (starts_number) {
            std::size_t end = pos_;
            if (src_[end] == '-') ++end;
            while (is_digit(end)) ++end;
            if (end < src_.size() && src_[end] == '.') {
                ++end;
                while (is_digit(end)) ++end;
            }
            if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
                std::size_t e = end + 1;
                if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
                if (is_digit(e)) {
                    end = e;
                    while (is_digit(end)) ++end;
                }
            }
            t.text = src_.substr(pos_, end - pos_);
            auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
            t.kind = (ec == std::errc{} && ptr == t.text.data() + t.text.size() && std::isfinite(t.number))
                         ? Tok::Number
                         : Tok::Invalid;
            pos_ = end;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
            std::size_t end = pos_;
            while (end < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) {
                ++end;
            }
            t.kind = Tok::Ident;
            t.text = src_.substr(pos_, end - pos_);
            pos_ = end;
            return t;
        }
        t.kind = Tok::Invalid;
        t.text = src_.substr(pos_, 1);
        ++pos_;
        return t;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

// A parsed sub-expression is either boolean (a rule node) or numeric (an operand).
struct Term {
    RulePtr boolean;
    std::optional<Operand> numeric;
    std::size_t pos = 0;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src) { advance(); }

    auto parse() -> RulePtr {
        Term t = parse_or();
        if (cur_.kind != Tok::End) {
            fail({"'and'", "'or'", "end of input"});
        }
        return require_bool(t, "rule");
    }

private:
    [[noreturn]] void fail(std::vector<std::string> expected) {
        throw RuleSyntaxError(cur_.pos, std::move(expected));
    }

    static auto require_bool(const Term& t, std::string_view context) -> RulePtr {
        if (!t.boolean) {
            throw Error(ErrorCode::RuleType, "type error at offset " + std::to_string(t.pos) +
                                                 ": " + std::string(context) +
                                                 " needs a boolean, found a numeric operand");
        }
        return t.boolean;
    }

    static auto require_numeric(const Term& t) -> Operand {
        if (!t.numeric) {
            throw Error(ErrorCode::RuleType, "type error at offset " + std::to_string(t.pos) +
                                                 ": comparison needs numeric operands");
        }
        return *t.numeric;
    }

    void advance() { cur_ = lexer_.next(); }

    auto is_keyword(std::string_view kw) const -> bool {
        return cur_.kind == Tok::Ident && cur_.text == kw;
    }

    auto parse_or() -> Term {
        Term lhs = parse_and();
        while (is_keyword("or")) {
            advance();
            Term rhs = parse_and();
            lhs = Term{make_rule(Or{require_bool(lhs, "'or'"), require_bool(rhs, "'or'")}),
                       std::nullopt, lhs.pos};
        }
        return lhs;
    }

    auto parse_and() -> Term {
        Term lhs = parse_unary();
        while (is_keyword("and")) {
            advance();
            Term rhs = parse_unary();
            lhs = Term{make_rule(And{require_bool(lhs, "'and'"), require_bool(rhs, "'and'")}),
                       std::nullopt, lhs.pos};
        }
        return lhs;
    }

    auto parse_unary() -> Term {
        if (is_keyword("not")) {
            const std::size_t pos = cur_.pos;
            advance();
            Term inner = parse_unary();
            return Term{make_rule(Not{require_bool(inner, "'not'")}), std::nullopt, pos};
        }
        return parse_cmp();
    }

    auto parse_cmp() -> Term {
        Term lhs = parse_primary();
        if (cur_.kind != Tok::Cmp) return lhs;
        const CmpOp op = cur_.op;
        advance();
        Term rhs = parse_primary();
        return Term{make_rule(Compare{require_numeric(lhs), op, require_numeric(rhs)}),
                    std::nullopt, lhs.pos};
    }

    auto parse_primary() -> Term {
        const std::size_t pos = cur_.pos;
        switch (cur_.kind) {
            case Tok::LParen: {
                advance();
                Term inner = parse_or();
                if (cur_.kind != Tok::RParen) fail({"')'"});
                advance();
                inner.pos = pos;
                return inner;
            }
            case Tok::Number: {
                Operand op{Operand::Kind::Literal, cur_.number};
                advance();
                return Term{nullptr, op, pos};
            }
            case Tok::Ident:
                if (cur_.text == "value") {
                    advance();
                    if (is_keyword("is")) {
                        advance();
                        if (!is_keyword("missing")) fail({"'missing'"});
                        advance();
                        return Term{make_rule(IsMissing{}), std::nullopt, pos};
                    }
                    return Term{nullptr, Operand{Operand::Kind::Value, 0.0}, pos};
                }
                if (cur_.text == "group_mean") {
                    advance();
                    return Term{nullptr, Operand{Operand::Kind::GroupMean, 0.0}, pos};
                }
                break;
            default:
                break;
        }
        fail({"'('", "number", "'value'", "'group_mean'"});
    }

    Lexer lexer_;
    Token cur_;
};

constexpr int kOrPrec = 1;
constexpr int kAndPrec = 2;
constexpr int kNotPrec = 3;
constexpr int kAtomPrec = 4;

auto precedence(const RuleExpr& e) -> int {
    return std::visit(
        [](const auto& n) -> int {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Or>) return kOrPrec;
            if constexpr (std::is_same_v<T, And>) return kAndPrec;
            if constexpr (std::is_same_v<T, Not>) return kNotPrec;
            return kAtomPrec;
        },
        e.node());
}

auto operand_text(const Operand& op) -> std::string {
    switch (op.kind) {
        case Operand::Kind::Value: return "value";
        case Operand::Kind::GroupMean: return "group_mean";
        case Operand::Kind::Literal: return format_number(op.literal);
    }
    return {};
}

auto wrap(const RuleExpr& e, bool paren) -> std::string {
    return paren ? "(" + e.to_string() + ")" : e.to_string();
}

auto resolve(const Operand& op, const CellValue& cell, const GroupStats& stats)
    -> std::optional<double> {
    switch (op.kind) {
        case Operand::Kind::Literal: return op.literal;
        case Operand::Kind::Value:
            if (cell.is_number()) return cell.as_number();
            return std::nullopt;
        case Operand::Kind::GroupMean: return stats.mean;
    }
    return std::nullopt;
}

}  // namespace

auto RuleExpr::to_string() const -> std::string {
    return std::visit(
        [](const auto& n) -> std::string {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, IsMissing>) {
                return "value is missing";
            } else if constexpr (std::is_same_v<T, Compare>) {
                return operand_text(n.lhs) + " " + std::string(cmp_op_symbol(n.op)) + " " +
                       operand_text(n.rhs);
            } else if constexpr (std::is_same_v<T, Not>) {
                return "not " + wrap(*n.operand, precedence(*n.operand) < kNotPrec);
            } else if constexpr (std::is_same_v<T, And>) {
                return wrap(*n.lhs, precedence(*n.lhs) < kAndPrec) + " and " +
                       wrap(*n.rhs, precedence(*n.rhs) <= kAndPrec);
            } else {
                return wrap(*n.lhs, precedence(*n.lhs) < kOrPrec) + " or " +
                       wrap(*n.rhs, precedence(*n.rhs) <= kOrPrec);
            }
        },
        node_);
}

auto operator==(const RuleExpr& a, const RuleExpr& b) -> bool {
    if (a.node_.index() != b.node_.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b.node_);
            if constexpr (std::is_same_v<T, IsMissing>) {
                return true;
            } else if constexpr (std::is_same_v<T, Compare>) {
                return x.lhs == y.lhs && x.op == y.op && x.rhs == y.rhs;
            } else if constexpr (std::is_same_v<T, Not>) {
                return *x.operand == *y.operand;
            } else {
                return *x.lhs == *y.lhs && *x.rhs == *y.rhs;
            }
        },
        a.node_);
}

auto parse_rule(std::string_view source) -> RulePtr {
    return Parser(source).parse();
}

auto eval_rule(const RuleExpr& rule, const CellValue& cell, const GroupStats& stats) -> bool {
    return std::visit(
        [&](const auto& n) -> bool {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, IsMissing>) {
                return cell.is_missing();
            } else if constexpr (std::is_same_v<T, Compare>) {
                const auto lhs = resolve(n.lhs, cell, stats);
                const auto rhs = resolve(n.rhs, cell, stats);
                if (!lhs || !rhs) return false;
                switch (n.op) {
                    case CmpOp::Less: return *lhs < *rhs;
                    case CmpOp::LessEqual: return *lhs <= *rhs;
                    case CmpOp::Greater: return *lhs > *rhs;
                    case CmpOp::GreaterEqual: return *lhs >= *rhs;
                    case CmpOp::Equal: return *lhs == *rhs;
                    case CmpOp::NotEqual: return *lhs != *rhs;
                }
                return false;
            } else if constexpr (std::is_same_v<T, Not>) {
                return !eval_rule(*n.operand, cell, stats);
            } else if constexpr (std::is_same_v<T, And>) {
                return eval_rule(*n.lhs, cell, stats) && eval_rule(*n.rhs, cell, stats);
            } else {
                return eval_rule(*n.lhs, cell, stats) || eval_rule(*n.rhs, cell, stats);
            }
        },
        rule.node());
}

}  // namespace corral
