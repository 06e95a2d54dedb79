#pragma once

#include "corral/table.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace corral {

/// One (categorical × numeric) slicing of a table.
struct GroupSpec {
    std::string group_by;
    std::string target;
    std::size_t min_support = 1;

    friend auto operator==(const GroupSpec&, const GroupSpec&) -> bool = default;
};

/// Group key; std::nullopt is the sentinel for rows whose group_by cell is Missing.
using GroupKey = std::optional<std::string>;

/// Ascending by code point, sentinel last.
auto compare_keys(const GroupKey& a, const GroupKey& b) -> std::strong_ordering;

struct GroupId {
    std::string group_by;
    std::string target;
    GroupKey key;

    friend auto operator<=>(const GroupId& a, const GroupId& b) -> std::strong_ordering;
    friend auto operator==(const GroupId&, const GroupId&) -> bool = default;

    /// "Country=Bhutan [Income]"; the sentinel prints as "<missing>".
    [[nodiscard]] auto label() const -> std::string;
};

struct Group {
    GroupSpec spec;
    GroupKey key;
    std::vector<std::size_t> rows;  // strictly increasing
    std::uint64_t version = 0;

    [[nodiscard]] auto id() const -> GroupId { return {spec.group_by, spec.target, key}; }
};

struct Grouping {
    std::vector<Group> groups;
    /// Rows that fell into groups below min_support.
    std::size_t excluded_rows = 0;
};

struct GroupStats {
    std::size_t count = 0;
    std::optional<double> mean;
    std::optional<double> std;  // population
    std::size_t missing_count = 0;
    std::size_t mismatch_count = 0;
};

/// Pooled mean / population std over the Number cells in `rows` (all rows when
/// empty optional). Two-pass: mean first, then squared deviations.
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;
};

auto numeric_moments(const Column& column) -> Moments;
auto numeric_moments(const Column& column, std::span<const std::size_t> rows) -> Moments;

/// Validates the spec against the table. Throws ColumnNotFound, KindMismatch
/// or InvalidSpec.
void validate_spec(const Table& table, const GroupSpec& spec);

/// All distinct keys of a column with their rows, in key order (sentinel last).
struct KeyRows {
    GroupKey key;
    std::vector<std::size_t> rows;
};
auto partition_by(const Table& table, std::size_t column_index) -> std::vector<KeyRows>;

auto enumerate_groups(const Table& table, const GroupSpec& spec) -> Grouping;

auto enumerate_all_specs(const Table& table,
                         const std::optional<std::vector<std::string>>& targets,
                         std::size_t min_support = 1) -> std::vector<GroupSpec>;

/// Throws StaleGroup when the group was computed against another version.
auto group_stats(const Table& table, const Group& group) -> GroupStats;

}  // namespace corral
