#pragma once

#include "corral/groups.hpp"
#include "corral/table.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <variant>

namespace corral {

// Declarative detector rules, e.g. "value is missing or value > group_mean".
//
//   expr    := or
//   or      := and ('or' and)*
//   and     := unary ('and' unary)*
//   unary   := 'not' unary | cmp
//   cmp     := primary [cmpop primary]
//   primary := '(' expr ')' | number | 'value' ['is' 'missing'] | 'group_mean'
//
// Comparisons take numeric operands and connectives take booleans; anything
// else is rejected with Error(RuleType).

enum class CmpOp { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

auto cmp_op_symbol(CmpOp op) -> std::string_view;

struct Operand {
    enum class Kind { Literal, Value, GroupMean };
    Kind kind = Kind::Literal;
    double literal = 0.0;

    friend auto operator==(const Operand&, const Operand&) -> bool = default;
};

class RuleExpr;
using RulePtr = std::shared_ptr<const RuleExpr>;

struct IsMissing {};
struct Compare {
    Operand lhs;
    CmpOp op = CmpOp::Less;
    Operand rhs;
};
struct Not {
    RulePtr operand;
};
struct And {
    RulePtr lhs;
    RulePtr rhs;
};
struct Or {
    RulePtr lhs;
    RulePtr rhs;
};

class RuleExpr {
public:
    using Node = std::variant<IsMissing, Compare, Not, And, Or>;

    explicit RuleExpr(Node node) : node_(std::move(node)) {}

    [[nodiscard]] auto node() const -> const Node& { return node_; }

    /// Canonical source text; parse_rule(to_string()) rebuilds an equal tree.
    [[nodiscard]] auto to_string() const -> std::string;

    friend auto operator==(const RuleExpr& a, const RuleExpr& b) -> bool;

private:
    Node node_;
};

auto make_rule(RuleExpr::Node node) -> RulePtr;

/// Throws RuleSyntaxError or Error(RuleType).
auto parse_rule(std::string_view source) -> RulePtr;

/// Total: numeric comparisons that touch a non-Number cell or an undefined
/// group mean are false.
auto eval_rule(const RuleExpr& rule, const CellValue& cell, const GroupStats& stats) -> bool;

}  // namespace corral
