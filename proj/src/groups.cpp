#include "corral/groups.hpp"

#include "corral/error.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>
#include <unordered_map>

namespace corral {

auto compare_keys(const GroupKey& a, const GroupKey& b) -> std::strong_ordering {
    if (a.has_value() != b.has_value()) {
        return a.has_value() ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    if (!a) return std::strong_ordering::equal;
    int c = a->compare(*b);
    if (c < 0) return std::strong_ordering::less;
    if (c > 0) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

auto operator<=>(const GroupId& a, const GroupId& b) -> std::strong_ordering {
    if (auto c = a.group_by <=> b.group_by; c != 0) return c;
    if (auto c = a.target <=> b.target; c != 0) return c;
    return compare_keys(a.key, b.key);
}

auto GroupId::label() const -> std::string {
    return group_by + "=" + (key ? *key : std::string("<missing>")) + " [" + target + "]";
}

namespace {

template <typename RowRange>
auto moments_over(const Column& column, const RowRange& rows) -> Moments {
    Moments m;
    double sum = 0.0;
    for (std::size_t r : rows) {
        const auto& cell = column.cells[r];
        if (!cell.is_number()) continue;
        sum += cell.as_number();
        ++m.n;
    }
    if (m.n == 0) return m;
    m.mean = sum / static_cast<double>(m.n);
    double sq = 0.0;
    for (std::size_t r : rows) {
        const auto& cell = column.cells[r];
        if (!cell.is_number()) continue;
        const double d = cell.as_number() - m.mean;
        sq += d * d;
    }
    m.std = std::sqrt(sq / static_cast<double>(m.n));
    return m;
}

struct AllRows {
    std::size_t n;
    struct iterator {
        std::size_t i;
        auto operator*() const -> std::size_t { return i; }
        auto operator++() -> iterator& {
            ++i;
            return *this;
        }
        auto operator!=(const iterator& o) const -> bool { return i != o.i; }
    };
    [[nodiscard]] auto begin() const -> iterator { return {0}; }
    [[nodiscard]] auto end() const -> iterator { return {n}; }
};

}  // namespace

auto numeric_moments(const Column& column) -> Moments {
    return moments_over(column, AllRows{column.cells.size()});
}

auto numeric_moments(const Column& column, std::span<const std::size_t> rows) -> Moments {
    return moments_over(column, rows);
}

void validate_spec(const Table& table, const GroupSpec& spec) {
    if (spec.min_support < 1) throw Error(ErrorCode::InvalidSpec, "min_support must be >= 1");
    if (spec.group_by == spec.target) {
        throw Error(ErrorCode::InvalidSpec, "group_by and target must differ");
    }
    const auto& by = table.column(spec.group_by);
    const auto& target = table.column(spec.target);
    if (by.kind != ColumnKind::Categorical) {
        throw Error(ErrorCode::KindMismatch, "group_by column '" + by.name + "' is not categorical");
    }
    if (target.kind != ColumnKind::Numeric) {
        throw Error(ErrorCode::KindMismatch, "target column '" + target.name + "' is not numeric");
    }
}

auto partition_by(const Table& table, std::size_t column_index) -> std::vector<KeyRows> {
    const auto& cells = table.column(column_index).cells;
    // Views point into the table's own cells, which outlive this call.
    std::unordered_map<std::string_view, std::size_t> slot;
    std::unordered_map<std::string, std::size_t> rendered_slot;
    std::vector<KeyRows> parts;
    std::vector<std::size_t> missing_rows;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const auto& cell = cells[r];
        if (cell.is_missing()) {
            missing_rows.push_back(r);
            continue;
        }
        std::size_t index = 0;
        if (cell.is_text()) {
            auto [it, inserted] = slot.try_emplace(std::string_view(cell.as_text()), parts.size());
            if (inserted) parts.push_back(KeyRows{cell.as_text(), {}});
            index = it->second;
        } else {
            // Categorical columns hold Text; a stray Number is keyed by its rendering.
            auto [it, inserted] =
                rendered_slot.try_emplace(format_number(cell.as_number()), parts.size());
            if (inserted) parts.push_back(KeyRows{it->first, {}});
            index = it->second;
        }
        parts[index].rows.push_back(r);
    }
    // Rendered numbers can collide with identical Text keys; merge them.
    std::sort(parts.begin(), parts.end(),
              [](const KeyRows& a, const KeyRows& b) { return *a.key < *b.key; });
    std::vector<KeyRows> merged;
    merged.reserve(parts.size());
    for (auto& part : parts) {
        if (!merged.empty() && *merged.back().key == *part.key) {
            auto& rows = merged.back().rows;
            rows.insert(rows.end(), part.rows.begin(), part.rows.end());
            std::sort(rows.begin(), rows.end());
        } else {
            merged.push_back(std::move(part));
        }
    }
    if (!missing_rows.empty()) merged.push_back(KeyRows{std::nullopt, std::move(missing_rows)});
    return merged;
}

auto enumerate_groups(const Table& table, const GroupSpec& spec) -> Grouping {
    validate_spec(table, spec);
    Grouping out;
    for (auto& part : partition_by(table, table.column_index(spec.group_by))) {
        if (part.rows.size() < spec.min_support) {
            out.excluded_rows += part.rows.size();
            continue;
        }
        out.groups.push_back(Group{spec, std::move(part.key), std::move(part.rows), table.version()});
    }
    return out;
}

auto enumerate_all_specs(const Table& table,
                         const std::optional<std::vector<std::string>>& targets,
                         std::size_t min_support) -> std::vector<GroupSpec> {
    if (min_support < 1) throw Error(ErrorCode::InvalidSpec, "min_support must be >= 1");
    std::vector<std::string> categorical;
    std::vector<std::string> numeric;
    for (std::size_t c = 0; c < table.column_count(); ++c) {
        const auto& col = table.column(c);
        (col.kind == ColumnKind::Categorical ? categorical : numeric).push_back(col.name);
    }
    if (targets) {
        for (const auto& t : *targets) {
            if (table.column(t).kind != ColumnKind::Numeric) {
                throw Error(ErrorCode::KindMismatch, "target column '" + t + "' is not numeric");
            }
        }
        numeric = *targets;
    }
    if (categorical.empty()) {
        throw Error(ErrorCode::NoCategoricalColumns, "table has no categorical columns");
    }
    if (numeric.empty()) throw Error(ErrorCode::NoNumericColumns, "table has no numeric columns");

    std::vector<GroupSpec> specs;
    specs.reserve(categorical.size() * numeric.size());
    for (const auto& by : categorical) {
        for (const auto& target : numeric) specs.push_back(GroupSpec{by, target, min_support});
    }
    return specs;
}

auto group_stats(const Table& table, const Group& group) -> GroupStats {
    if (group.version != table.version()) {
        throw Error(ErrorCode::StaleGroup, "group " + group.id().label() + " belongs to version " +
                                               std::to_string(group.version) + ", table is at " +
                                               std::to_string(table.version()));
    }
    const auto& target = table.column(group.spec.target);
    GroupStats stats;
    stats.count = group.rows.size();
    for (std::size_t r : group.rows) {
        const auto& cell = target.cells.at(r);
        if (cell.is_missing()) ++stats.missing_count;
        if (cell.is_text()) ++stats.mismatch_count;
    }
    const auto m = numeric_moments(target, group.rows);
    if (m.n > 0) {
        stats.mean = m.mean;
        stats.std = m.std;
    }
    return stats;
}

}  // namespace corral
