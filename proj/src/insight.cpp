#include "corral/insight.hpp"

#include "corral/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace corral {

auto dominant_type(const std::map<AnomalyType, std::size_t>& per_type) -> AnomalyType {
    // std::map iterates in the fixed type order, so the first maximum wins.
    AnomalyType best;
    std::size_t best_count = 0;
    for (const auto& [type, count] : per_type) {
        if (count > best_count) {
            best = type;
            best_count = count;
        }
    }
    return best;
}

auto rank_groups(const AnomalyIndex& index, std::size_t k) -> std::vector<RankedGroup> {
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
    std::vector<RankedGroup> ranked;
    for (const auto& [group, per_type] : index.counts) {
        RankedGroup r;
        r.group = group;
        for (const auto& [type, count] : per_type) {
            if (count == 0) continue;
            r.per_type[type] = count;
            r.total_anomalies += count;
        }
        if (r.total_anomalies == 0) continue;
        r.dominant_type = dominant_type(r.per_type);
        ranked.push_back(std::move(r));
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedGroup& a, const RankedGroup& b) {
        if (a.total_anomalies != b.total_anomalies) return a.total_anomalies > b.total_anomalies;
        return a.group < b.group;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

auto attribute_summary(const Table& table, std::span<const AnomalyRecord> records)
    -> std::vector<AttributeSummary> {
    std::map<std::string, std::map<AnomalyType, std::size_t>> counts;
    std::set<std::tuple<std::string, std::size_t, AnomalyType>> seen_cells;
    std::set<std::tuple<std::string, GroupKey, AnomalyType>> seen_groups;
    for (const auto& r : records) {
        if (r.cells.empty()) {
            if (seen_groups.emplace(r.group.group_by, r.group.key, r.type).second) {
                ++counts[r.group.group_by][r.type];
            }
            continue;
        }
        for (const auto& c : r.cells) {
            if (seen_cells.emplace(c.column, c.row, r.type).second) ++counts[c.column][r.type];
        }
    }

    std::vector<AttributeSummary> out;
    const double rows = static_cast<double>(table.row_count());
    for (auto& [column, per_type] : counts) {
        AttributeSummary s;
        s.column = column;
        for (const auto& [type, n] : per_type) {
            s.per_type_frequency[type] = rows > 0 ? static_cast<double>(n) / rows : 0.0;
            s.score += static_cast<double>(n);
        }
        s.per_type_counts = std::move(per_type);
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(), [](const AttributeSummary& a, const AttributeSummary& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.column < b.column;
    });
    return out;
}

auto chart_kind_name(ChartKind kind) -> std::string_view {
    switch (kind) {
        case ChartKind::StackedHistogram: return "stacked_histogram";
        case ChartKind::Scatter: return "scatter";
        case ChartKind::Line: return "line";
        case ChartKind::Heatmap: return "heatmap";
    }
    return {};
}

auto color_mode_name(ColorMode mode) -> std::string_view {
    return mode == ColorMode::GroupName ? "group_name" : "error_type";
}

auto parse_chart_kind(std::string_view name) -> ChartKind {
    for (auto k : {ChartKind::StackedHistogram, ChartKind::Scatter, ChartKind::Line, ChartKind::Heatmap}) {
        if (chart_kind_name(k) == name) return k;
    }
    throw Error(ErrorCode::UnsupportedKind, "unsupported chart kind '" + std::string(name) + "'");
}

auto parse_color_mode(std::string_view name) -> ColorMode {
    if (name == "group_name") return ColorMode::GroupName;
    if (name == "error_type") return ColorMode::ErrorType;
    throw Error(ErrorCode::UnsupportedKind, "unsupported color mode '" + std::string(name) + "'");
}

namespace {

auto quantile(const std::vector<double>& sorted, double p) -> double {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

constexpr std::size_t kMinBins = 5;
constexpr std::size_t kMaxBins = 50;
constexpr std::size_t kFallbackBins = 10;

auto key_label(const GroupKey& key) -> std::string { return key ? *key : "<missing>"; }

}  // namespace

auto histogram_edges(std::vector<double> values) -> std::vector<double> {
    if (values.empty()) return {};
    std::sort(values.begin(), values.end());
    double lo = values.front();
    double hi = values.back();
    const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
    std::size_t bins = kFallbackBins;
    if (iqr > 0.0) {
        const double width = 2.0 * iqr * std::cbrt(1.0 / static_cast<double>(values.size()));
        const double raw = std::ceil((hi - lo) / width);
        bins = static_cast<std::size_t>(std::clamp(raw, double(kMinBins), double(kMaxBins)));
    }
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    std::vector<double> edges(bins + 1);
    const double step = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) edges[i] = lo + step * static_cast<double>(i);
    edges[bins] = hi;
    return edges;
}

auto bin_index(std::span<const double> edges, double v) -> std::size_t {
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    const auto pos = static_cast<std::size_t>(it - edges.begin());
    const std::size_t bins = edges.size() - 1;
    if (pos == 0) return 0;
    return std::min(pos - 1, bins - 1);
}

auto chart_payload(const Table& table, const GroupSpec& spec, ChartKind kind, ColorMode mode,
                   std::span<const AnomalyRecord> records) -> ChartPayload {
    validate_spec(table, spec);
    const auto grouping = enumerate_groups(table, spec);
    const auto& groups = grouping.groups;
    const auto& target = table.column(spec.target);

    ChartPayload p;
    p.kind = kind;
    p.mode = mode;
    p.spec = spec;
    p.version = table.version();

    // Records of this spec, plus the custom types seen anywhere (for stable classes).
    std::set<std::string> custom_ids;
    std::map<GroupKey, std::map<AnomalyType, std::size_t>, std::function<bool(const GroupKey&, const GroupKey&)>>
        per_group([](const GroupKey& a, const GroupKey& b) { return compare_keys(a, b) < 0; });
    std::map<std::size_t, std::set<AnomalyType>> cell_types;
    std::set<std::pair<std::size_t, AnomalyType>> marks;
    for (const auto& r : records) {
        if (r.version != table.version()) {
            throw Error(ErrorCode::StaleRecord, "record from version " + std::to_string(r.version) +
                                                    " used with table version " +
                                                    std::to_string(table.version()));
        }
        if (r.type.tag == AnomalyTag::Custom) custom_ids.insert(r.type.custom_id);
        if (r.group.group_by != spec.group_by || r.group.target != spec.target) continue;
        ++per_group[r.group.key][r.type];
        for (const auto& c : r.cells) {
            if (c.column != spec.target) continue;
            cell_types[c.row].insert(r.type);
            marks.emplace(c.row, r.type);
        }
    }
    for (const auto& [row, type] : marks) p.anomaly_marks.push_back({CellRef{row, spec.target}, type});

    auto type_class = [&](const AnomalyType& t) -> int {
        if (t.tag != AnomalyTag::Custom) return static_cast<int>(t.tag) + 1;
        const auto it = custom_ids.find(t.custom_id);
        return 5 + static_cast<int>(std::distance(custom_ids.begin(), it));
    };

    // Per-row color key and class.
    struct Coloring {
        std::string key;
        int color_class = 0;
    };
    std::vector<Coloring> group_coloring(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (mode == ColorMode::GroupName) {
            group_coloring[g] = {key_label(groups[g].key), static_cast<int>(g) + 1};
        } else {
            const auto it = per_group.find(groups[g].key);
            if (it == per_group.end() || it->second.empty()) {
                group_coloring[g] = {"no_error", kNoErrorClass};
            } else {
                const auto t = dominant_type(it->second);
                group_coloring[g] = {t.name(), type_class(t)};
            }
        }
    }
    const Coloring outside = mode == ColorMode::GroupName ? Coloring{"other", kOtherClass}
                                                          : Coloring{"no_error", kNoErrorClass};
    constexpr std::size_t kOutside = static_cast<std::size_t>(-1);
    std::vector<std::size_t> owner(table.row_count(), kOutside);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t r : groups[g].rows) owner[r] = g;
    }
    auto coloring_of = [&](std::size_t row) -> const Coloring& {
        return owner[row] == kOutside ? outside : group_coloring[owner[row]];
    };

    // Legend.
    if (mode == ColorMode::GroupName) {
        if (grouping.excluded_rows > 0) p.legend.push_back({outside.key, outside.color_class, std::nullopt, std::nullopt});
        for (std::size_t g = 0; g < groups.size(); ++g) {
            p.legend.push_back({group_coloring[g].key, group_coloring[g].color_class, groups[g].key, std::nullopt});
        }
    } else {
        std::map<int, std::string> used;
        if (grouping.excluded_rows > 0) used[outside.color_class] = outside.key;
        for (const auto& c : group_coloring) used[c.color_class] = c.key;
        for (const auto& [cls, key] : used) {
            p.legend.push_back({key, cls, std::nullopt, key == "no_error" ? std::nullopt : std::optional(key)});
        }
    }

    auto points_for = [&](std::size_t row) {
        ChartPoint pt;
        pt.row = row;
        pt.value = target.cells[row].as_number();
        pt.key = coloring_of(row).key;
        pt.color_class = coloring_of(row).color_class;
        if (auto it = cell_types.find(row); it != cell_types.end()) {
            pt.anomalies.assign(it->second.begin(), it->second.end());
        }
        return pt;
    };

    switch (kind) {
        case ChartKind::StackedHistogram:
        case ChartKind::Heatmap: {
            std::vector<double> values;
            for (const auto& c : target.cells) {
                if (c.is_number()) values.push_back(c.as_number());
            }
            p.edges = histogram_edges(values);
            const std::size_t nbins = p.edges.empty() ? 0 : p.edges.size() - 1;
            if (kind == ChartKind::StackedHistogram) {
                std::vector<std::map<int, Segment>> segs(nbins);
                for (std::size_t r = 0; r < target.cells.size(); ++r) {
                    if (!target.cells[r].is_number()) continue;
                    const std::size_t b = bin_index(p.edges, target.cells[r].as_number());
                    const auto& col = coloring_of(r);
                    auto& seg = segs[b][col.color_class];
                    seg.key = col.key;
                    seg.color_class = col.color_class;
                    ++seg.count;
                }
                for (std::size_t b = 0; b < nbins; ++b) {
                    Bin bin{p.edges[b], p.edges[b + 1], 0, {}};
                    for (auto& [cls, seg] : segs[b]) {
                        bin.count += seg.count;
                        bin.segments.push_back(std::move(seg));
                    }
                    p.bins.push_back(std::move(bin));
                }
            } else {
                const bool has_outside = grouping.excluded_rows > 0;
                const std::size_t offset = has_outside ? 1 : 0;
                if (has_outside) p.rows.push_back(outside.key);
                for (const auto& g : groups) p.rows.push_back(key_label(g.key));
                std::vector<std::vector<std::size_t>> grid(p.rows.size(), std::vector<std::size_t>(nbins, 0));
                std::size_t max_count = 0;
                for (std::size_t r = 0; r < target.cells.size(); ++r) {
                    if (!target.cells[r].is_number()) continue;
                    const std::size_t b = bin_index(p.edges, target.cells[r].as_number());
                    const std::size_t row = owner[r] == kOutside ? 0 : owner[r] + offset;
                    max_count = std::max(max_count, ++grid[row][b]);
                }
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    for (std::size_t b = 0; b < nbins; ++b) {
                        const std::size_t n = grid[g][b];
                        const int cls = n == 0 ? 0 : static_cast<int>((4 * n + max_count - 1) / max_count);
                        p.cells.push_back({g, b, n, cls});
                    }
                }
            }
            break;
        }
        case ChartKind::Scatter:
            for (std::size_t r = 0; r < target.cells.size(); ++r) {
                if (target.cells[r].is_number()) p.points.push_back(points_for(r));
            }
            break;
        case ChartKind::Line: {
            std::vector<std::size_t> outside_rows;
            for (std::size_t r = 0; r < owner.size(); ++r) {
                if (owner[r] == kOutside) outside_rows.push_back(r);
            }
            // One series per group, keyed by group in both modes.
            auto add_series = [&](std::string key, int color_class, std::span<const std::size_t> rows) {
                Series s{std::move(key), color_class, {}};
                for (std::size_t r : rows) {
                    if (target.cells[r].is_number()) s.points.push_back(points_for(r));
                }
                p.series.push_back(std::move(s));
            };
            if (!outside_rows.empty()) add_series("other", outside.color_class, outside_rows);
            for (std::size_t g = 0; g < groups.size(); ++g) {
                add_series(key_label(groups[g].key), group_coloring[g].color_class, groups[g].rows);
            }
            break;
        }
    }
    return p;
}

}  // namespace corral
