#pragma once

#include "corral/groups.hpp"
#include "corral/rule.hpp"
#include "corral/table.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace corral {

/// Type tags, in their fixed tie-break order.
enum class AnomalyTag { MissingValue = 0, Outlier = 1, TypeMismatch = 2, IncompleteGroup = 3, Custom = 4 };

struct AnomalyType {
    AnomalyTag tag = AnomalyTag::MissingValue;
    std::string custom_id;  // only for Custom

    static auto custom(std::string id) -> AnomalyType { return {AnomalyTag::Custom, std::move(id)}; }

    friend auto operator<=>(const AnomalyType&, const AnomalyType&) = default;
    friend auto operator==(const AnomalyType&, const AnomalyType&) -> bool = default;

    /// "missing_value", "outlier", ..., or "custom:<id>".
    [[nodiscard]] auto name() const -> std::string;
    /// Inverse of name(); throws Error(BadRequest) for unknown names.
    static auto from_name(std::string_view name) -> AnomalyType;
};

inline const AnomalyType kMissingValue{AnomalyTag::MissingValue, {}};
inline const AnomalyType kOutlier{AnomalyTag::Outlier, {}};
inline const AnomalyType kTypeMismatch{AnomalyTag::TypeMismatch, {}};
inline const AnomalyType kIncompleteGroup{AnomalyTag::IncompleteGroup, {}};

/// A flagged condition. Cell-level records carry exactly one cell;
/// IncompleteGroup records carry none.
///
/// detail keys:
///   Outlier          deviation (|v-mean|/std), mean, std, sigma
///   IncompleteGroup  count, threshold
struct AnomalyRecord {
    AnomalyType type;
    GroupId group;
    std::vector<CellRef> cells;
    std::map<std::string, double> detail;
    std::uint64_t version = 0;
};

struct AnomalyIndex {
    std::map<AnomalyType, std::set<GroupId>> by_type;
    std::map<GroupId, std::set<AnomalyType>> by_group;
    std::map<GroupId, std::map<AnomalyType, std::size_t>> counts;

    void add(const AnomalyRecord& record);
    [[nodiscard]] auto total() const -> std::size_t;

    friend auto operator==(const AnomalyIndex&, const AnomalyIndex&) -> bool = default;
};

auto build_index(std::span<const AnomalyRecord> records) -> AnomalyIndex;

struct CustomRule {
    std::string id;
    std::string rule;
};

struct DetectorConfig {
    double outlier_sigma = 2.0;
    std::size_t incomplete_threshold = 2;
    double numeric_majority = 0.5;
    std::size_t top_k = 3;
    std::vector<CustomRule> custom_rules;
};

/// Throws Error(InvalidConfig) for out-of-range values or bad custom ids, and
/// the parser's errors for bad rule text.
void validate_config(const DetectorConfig& config);

/// True when `id` is nonempty and matches [A-Za-z0-9_-]+.
auto valid_custom_id(std::string_view id) -> bool;

/// In-process detector plugin: flags a target cell given its group's stats.
struct DetectorPlugin {
    std::string id;
    std::function<bool(const CellValue&, const GroupStats&)> predicate;
};

auto detect_missing(const Table& table, const Group& group) -> std::vector<AnomalyRecord>;

/// Flags |v - mean| > sigma * std over the pooled Number cells of `column`.
/// Rows outside every listed group produce no record.
auto detect_outliers(const Table& table, std::string_view column, std::span<const Group> groups,
                     double sigma) -> std::vector<AnomalyRecord>;

auto detect_type_mismatch(const Table& table, std::string_view column,
                          std::span<const Group> groups) -> std::vector<AnomalyRecord>;

auto detect_incomplete(std::span<const Group> groups, std::size_t threshold)
    -> std::vector<AnomalyRecord>;

struct Detection {
    std::vector<AnomalyRecord> records;
    AnomalyIndex index;
};

/// Runs the default detectors, every custom rule and every plugin over all
/// groups of every spec. Record order: spec order, then group key, then row
/// (group-level records after cell records), then type.
auto run_detectors(const Table& table, std::span<const GroupSpec> specs,
                   const DetectorConfig& config, std::span<const DetectorPlugin> plugins = {})
    -> Detection;

}  // namespace corral
