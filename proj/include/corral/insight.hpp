#pragma once

#include "corral/anomaly.hpp"
#include "corral/groups.hpp"
#include "corral/table.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace corral {

struct RankedGroup {
    GroupId group;
    std::size_t total_anomalies = 0;
    std::map<AnomalyType, std::size_t> per_type;
    AnomalyType dominant_type;
};

/// Highest-count type; ties go to the earlier type in the fixed order.
auto dominant_type(const std::map<AnomalyType, std::size_t>& per_type) -> AnomalyType;

/// Groups by total anomalies descending, ties by ascending group id. Groups
/// without anomalies never appear. Throws InvalidConfig when k < 1.
auto rank_groups(const AnomalyIndex& index, std::size_t k) -> std::vector<RankedGroup>;

struct AttributeSummary {
    std::string column;
    std::map<AnomalyType, std::size_t> per_type_counts;
    std::map<AnomalyType, double> per_type_frequency;  // count / row_count
    double score = 0.0;                                 // sum of counts
};

/// Per-column anomaly tallies. Cell records count toward their cell's
/// column, each cell once per type; IncompleteGroup records count once per
/// distinct group key toward the group_by column.
auto attribute_summary(const Table& table, std::span<const AnomalyRecord> records)
    -> std::vector<AttributeSummary>;

enum class ChartKind { StackedHistogram, Scatter, Line, Heatmap };
enum class ColorMode { GroupName, ErrorType };

auto chart_kind_name(ChartKind kind) -> std::string_view;
auto color_mode_name(ColorMode mode) -> std::string_view;
/// Throw Error(UnsupportedKind) for unknown names.
auto parse_chart_kind(std::string_view name) -> ChartKind;
auto parse_color_mode(std::string_view name) -> ColorMode;

/// Color classes. Group-name mode: 0 is reserved for rows outside the listed
/// groups, 1.. follow group key order. Error-type mode: 0 is "no error",
/// 1..4 the default types in order, 5.. custom ids ascending.
inline constexpr int kOtherClass = 0;
inline constexpr int kNoErrorClass = 0;

struct Segment {
    std::string key;  // group label or type name
    std::size_t count = 0;
    int color_class = 0;
};

struct Bin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::vector<Segment> segments;
};

struct ChartPoint {
    std::size_t row = 0;
    double value = 0.0;
    std::string key;
    int color_class = 0;
    std::vector<AnomalyType> anomalies;
};

struct Series {
    std::string key;
    int color_class = 0;
    std::vector<ChartPoint> points;
};

struct HeatCell {
    std::size_t group = 0;  // index into ChartPayload::legend rows
    std::size_t bin = 0;
    std::size_t count = 0;
    int color_class = 0;  // 0 empty, 1..4 by count quartile of the max
};

struct LegendEntry {
    std::string key;
    int color_class = 0;
    std::optional<std::string> group_key;  // group-name mode; nullopt for the sentinel/other
    std::optional<std::string> type;       // error-type mode
};

struct AnomalyMark {
    CellRef cell;
    AnomalyType type;
};

struct ChartPayload {
    ChartKind kind = ChartKind::StackedHistogram;
    ColorMode mode = ColorMode::GroupName;
    GroupSpec spec;
    std::uint64_t version = 0;
    std::vector<double> edges;         // histogram / heatmap
    std::vector<Bin> bins;             // histogram
    std::vector<ChartPoint> points;    // scatter
    std::vector<Series> series;        // line
    std::vector<std::string> rows;     // heatmap row labels (group keys)
    std::vector<HeatCell> cells;       // heatmap
    std::vector<LegendEntry> legend;
    std::vector<AnomalyMark> anomaly_marks;
};

/// Bin edges for `values` (Freedman-Diaconis width, clamped to [5, 50] bins;
/// 10 bins when the IQR is zero). Empty input yields no edges.
auto histogram_edges(std::vector<double> values) -> std::vector<double>;

/// Index of the bin holding `v`; the last bin is closed on the right.
auto bin_index(std::span<const double> edges, double v) -> std::size_t;

auto chart_payload(const Table& table, const GroupSpec& spec, ChartKind kind, ColorMode mode,
                   std::span<const AnomalyRecord> records) -> ChartPayload;

}  // namespace corral
