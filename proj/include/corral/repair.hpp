#pragma once

#include "corral/anomaly.hpp"
#include "corral/groups.hpp"
#include "corral/table.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace corral {

// ---------------------------------------------------------------------------
// Actions

struct ImputeGroupMean {
    std::vector<CellRef> cells;
    GroupId group;
    friend auto operator==(const ImputeGroupMean&, const ImputeGroupMean&) -> bool = default;
};

struct ImputeColumnMean {
    std::vector<CellRef> cells;
    friend auto operator==(const ImputeColumnMean&, const ImputeColumnMean&) -> bool = default;
};

struct RemoveRows {
    std::vector<std::size_t> rows;
    friend auto operator==(const RemoveRows&, const RemoveRows&) -> bool = default;
};

struct ConvertCells {
    std::vector<CellRef> cells;
    friend auto operator==(const ConvertCells&, const ConvertCells&) -> bool = default;
};

struct MergeGroups {
    std::string column;
    std::string source_key;
    std::string dest_key;
    friend auto operator==(const MergeGroups&, const MergeGroups&) -> bool = default;
};

/// Applies a registered custom wrangler to each listed cell.
struct CustomWrangle {
    std::string wrangler;
    std::vector<CellRef> cells;
    GroupId group;
    friend auto operator==(const CustomWrangle&, const CustomWrangle&) -> bool = default;
};

using RepairAction =
    std::variant<ImputeGroupMean, ImputeColumnMean, RemoveRows, ConvertCells, MergeGroups, CustomWrangle>;

/// Wire tag: "impute_group_mean", "remove_rows", ...
auto action_tag(const RepairAction& action) -> std::string_view;

/// Human-readable one-liner for reports and the repair kit.
auto describe_action(const RepairAction& action) -> std::string;

/// Sorts and de-duplicates cell and row lists in place.
void normalize_action(RepairAction& action);

// ---------------------------------------------------------------------------
// Custom wranglers

struct CustomWrangler {
    std::string name;        // [A-Za-z0-9_-]+, unique
    std::string anomaly_id;  // custom anomaly type it is offered for
    /// New cell value given the current cell and the stats of its group.
    std::function<CellValue(const CellValue&, const GroupStats&)> transform;
    /// Optional Python expression over `x` (float, str or None) and
    /// `group_mean` (float or None); used by the script generator.
    std::optional<std::string> python_expr;
};

class WranglerRegistry {
public:
    /// Throws Error(InvalidConfig) on a bad or duplicate name.
    void add(CustomWrangler wrangler);
    [[nodiscard]] auto find(std::string_view name) const -> const CustomWrangler*;
    [[nodiscard]] auto for_anomaly(std::string_view anomaly_id) const
        -> std::vector<const CustomWrangler*>;

private:
    std::vector<CustomWrangler> wranglers_;
};

// ---------------------------------------------------------------------------
// Results and inverses

struct CellRestores {
    std::vector<std::pair<CellRef, CellValue>> cells;
};

struct RowReinserts {
    /// Ascending by index; index is the row's position in the prior table and
    /// values are in column order.
    std::vector<std::pair<std::size_t, std::vector<CellValue>>> rows;
};

struct InverseRecord {
    std::variant<CellRestores, RowReinserts> payload;
    std::uint64_t prior_version = 0;
};

struct ActionDiff {
    std::size_t cells_changed = 0;
    std::size_t rows_removed = 0;
    std::vector<GroupId> affected_groups;
    /// after - before, for every group present on both sides with a defined mean.
    std::map<GroupId, double> mean_shift;
    /// Anomaly counts per type (before, after); filled in by the session.
    std::map<AnomalyType, std::pair<std::size_t, std::size_t>> anomaly_delta;
};

struct ActionResult {
    Table table;
    InverseRecord inverse;
    ActionDiff diff;
};

// ---------------------------------------------------------------------------
// Operations

/// Lenient numeric conversion: [currency][sign] digits [with comma
/// thousands] [.fraction] [k|m|b suffix], surrounding whitespace ignored.
auto convert_numeric_string(std::string_view text) -> std::optional<double>;

/// Similarity in [0, 1]: 1 for an initialism match ("USA" vs "United States
/// of America"), otherwise 1 - normalized Levenshtein distance over
/// case-folded, punctuation-stripped code points.
auto key_similarity(std::string_view a, std::string_view b) -> double;

using SimilarityFn = std::function<double(std::string_view, std::string_view)>;

inline constexpr double kDefaultMinSimilarity = 0.6;

auto suggest_merge_target(const Group& small, std::span<const Group> candidates,
                          double min_similarity = kDefaultMinSimilarity,
                          const SimilarityFn& similarity = {}) -> std::optional<Group>;

struct SuggestOptions {
    double min_similarity = kDefaultMinSimilarity;
    SimilarityFn similarity;
    const WranglerRegistry* wranglers = nullptr;
};

/// Candidate repairs in fixed preference order. `groups` are the groups of the
/// record's spec at the table's version.
auto suggest_repairs(const AnomalyRecord& record, const Table& table, std::span<const Group> groups,
                     const SuggestOptions& options = {}) -> std::vector<RepairAction>;

/// Applies the action to produce the next version. `specs` scope the diff.
auto apply_action(const Table& table, const RepairAction& action, std::span<const GroupSpec> specs = {},
                  const WranglerRegistry* wranglers = nullptr) -> ActionResult;

/// Restores the prior version exactly.
auto apply_inverse(const Table& table, const InverseRecord& inverse) -> Table;

}  // namespace corral
