#include "corral/anomaly.hpp"

#include "corral/error.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace corral {

auto AnomalyType::name() const -> std::string {
    switch (tag) {
        case AnomalyTag::MissingValue: return "missing_value";
        case AnomalyTag::Outlier: return "outlier";
        case AnomalyTag::TypeMismatch: return "type_mismatch";
        case AnomalyTag::IncompleteGroup: return "incomplete_group";
        case AnomalyTag::Custom: return "custom:" + custom_id;
    }
    return {};
}

auto AnomalyType::from_name(std::string_view name) -> AnomalyType {
    if (name == "missing_value") return kMissingValue;
    if (name == "outlier") return kOutlier;
    if (name == "type_mismatch") return kTypeMismatch;
    if (name == "incomplete_group") return kIncompleteGroup;
    constexpr std::string_view prefix = "custom:";
    if (name.substr(0, prefix.size()) == prefix && valid_custom_id(name.substr(prefix.size()))) {
        return custom(std::string(name.substr(prefix.size())));
    }
    throw Error(ErrorCode::BadRequest, "unknown anomaly type '" + std::string(name) + "'");
}

void AnomalyIndex::add(const AnomalyRecord& record) {
    by_type[record.type].insert(record.group);
    by_group[record.group].insert(record.type);
    ++counts[record.group][record.type];
}

auto AnomalyIndex::total() const -> std::size_t {
    std::size_t n = 0;
    for (const auto& [group, per_type] : counts) {
        for (const auto& [type, count] : per_type) n += count;
    }
    return n;
}

auto build_index(std::span<const AnomalyRecord> records) -> AnomalyIndex {
    AnomalyIndex index;
    for (const auto& r : records) index.add(r);
    return index;
}

auto valid_custom_id(std::string_view id) -> bool {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
               c == '_' || c == '-';
    });
}

void validate_config(const DetectorConfig& config) {
    if (!(config.outlier_sigma > 0.0) || !std::isfinite(config.outlier_sigma)) {
        throw Error(ErrorCode::InvalidConfig, "outlier_sigma must be a positive number");
    }
    if (config.incomplete_threshold < 1) {
        throw Error(ErrorCode::InvalidConfig, "incomplete_threshold must be >= 1");
    }
    if (!(config.numeric_majority > 0.0 && config.numeric_majority <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "numeric_majority must lie in (0, 1]");
    }
    if (config.top_k < 1) throw Error(ErrorCode::InvalidConfig, "top_k must be >= 1");
    std::unordered_set<std::string> ids;
    for (const auto& rule : config.custom_rules) {
        if (!valid_custom_id(rule.id)) {
            throw Error(ErrorCode::InvalidConfig, "invalid custom rule id '" + rule.id + "'");
        }
        if (!ids.insert(rule.id).second) {
            throw Error(ErrorCode::InvalidConfig, "duplicate custom rule id '" + rule.id + "'");
        }
        (void)parse_rule(rule.rule);
    }
}

namespace {

void require_current(const Table& table, const Group& group) {
    if (group.version != table.version()) {
        throw Error(ErrorCode::StaleGroup, "group " + group.id().label() + " is stale");
    }
}

auto require_numeric(const Table& table, std::string_view column) -> const Column& {
    const auto& col = table.column(column);
    if (col.kind != ColumnKind::Numeric) {
        throw Error(ErrorCode::KindMismatch, "column '" + col.name + "' is not numeric");
    }
    return col;
}

auto cell_record(const AnomalyType& type, const GroupId& group, std::size_t row,
                 const std::string& column, std::uint64_t version) -> AnomalyRecord {
    AnomalyRecord rec;
    rec.type = type;
    rec.group = group;
    rec.cells.push_back(CellRef{row, column});
    rec.version = version;
    return rec;
}

// Per-row outlier deviation for a column; nullopt where not flagged.
struct OutlierScan {
    Moments moments;
    std::vector<std::optional<double>> deviation;
};

auto scan_outliers(const Column& col, double sigma) -> OutlierScan {
    OutlierScan scan;
    scan.moments = numeric_moments(col);
    scan.deviation.assign(col.cells.size(), std::nullopt);
    if (scan.moments.n == 0 || scan.moments.std == 0.0) return scan;
    const double band = sigma * scan.moments.std;
    for (std::size_t r = 0; r < col.cells.size(); ++r) {
        const auto& cell = col.cells[r];
        if (!cell.is_number()) continue;
        const double dist = std::fabs(cell.as_number() - scan.moments.mean);
        if (dist > band) scan.deviation[r] = dist / scan.moments.std;
    }
    return scan;
}

auto outlier_record(const GroupId& group, std::size_t row, const std::string& column,
                    const OutlierScan& scan, double sigma, std::uint64_t version) -> AnomalyRecord {
    auto rec = cell_record(kOutlier, group, row, column, version);
    rec.detail = {{"deviation", *scan.deviation[row]},
                  {"mean", scan.moments.mean},
                  {"std", scan.moments.std},
                  {"sigma", sigma}};
    return rec;
}

auto incomplete_record(const Group& g, std::size_t threshold) -> AnomalyRecord {
    AnomalyRecord rec;
    rec.type = kIncompleteGroup;
    rec.group = g.id();
    rec.version = g.version;
    rec.detail = {{"count", static_cast<double>(g.rows.size())},
                  {"threshold", static_cast<double>(threshold)}};
    return rec;
}

auto group_of_row(std::size_t row_count, std::span<const Group> groups)
    -> std::vector<const Group*> {
    std::vector<const Group*> owner(row_count, nullptr);
    for (const auto& g : groups) {
        for (std::size_t r : g.rows) {
            if (r < row_count) owner[r] = &g;
        }
    }
    return owner;
}

}  // namespace

auto detect_missing(const Table& table, const Group& group) -> std::vector<AnomalyRecord> {
    require_current(table, group);
    const auto& col = table.column(group.spec.target);
    const GroupId id = group.id();
    std::vector<AnomalyRecord> out;
    for (std::size_t r : group.rows) {
        if (col.cells.at(r).is_missing()) {
            out.push_back(cell_record(kMissingValue, id, r, col.name, table.version()));
        }
    }
    return out;
}

auto detect_outliers(const Table& table, std::string_view column, std::span<const Group> groups,
                     double sigma) -> std::vector<AnomalyRecord> {
    if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidConfig, "sigma must be positive");
    const auto& col = require_numeric(table, column);
    for (const auto& g : groups) require_current(table, g);
    const auto scan = scan_outliers(col, sigma);
    const auto owner = group_of_row(table.row_count(), groups);
    std::vector<AnomalyRecord> out;
    for (std::size_t r = 0; r < col.cells.size(); ++r) {
        if (!scan.deviation[r] || owner[r] == nullptr) continue;
        out.push_back(outlier_record(owner[r]->id(), r, col.name, scan, sigma, table.version()));
    }
    return out;
}

auto detect_type_mismatch(const Table& table, std::string_view column,
                          std::span<const Group> groups) -> std::vector<AnomalyRecord> {
    const auto& col = require_numeric(table, column);
    for (const auto& g : groups) require_current(table, g);
    const auto owner = group_of_row(table.row_count(), groups);
    std::vector<AnomalyRecord> out;
    for (std::size_t r = 0; r < col.cells.size(); ++r) {
        if (!col.cells[r].is_text() || owner[r] == nullptr) continue;
        out.push_back(cell_record(kTypeMismatch, owner[r]->id(), r, col.name, table.version()));
    }
    return out;
}

auto detect_incomplete(std::span<const Group> groups, std::size_t threshold)
    -> std::vector<AnomalyRecord> {
    if (threshold < 1) throw Error(ErrorCode::InvalidConfig, "threshold must be >= 1");
    std::vector<AnomalyRecord> out;
    for (const auto& g : groups) {
        if (g.rows.size() < threshold) out.push_back(incomplete_record(g, threshold));
    }
    return out;
}

auto run_detectors(const Table& table, std::span<const GroupSpec> specs,
                   const DetectorConfig& config, std::span<const DetectorPlugin> plugins)
    -> Detection {
    validate_config(config);

    // Custom detectors (rules and plugins) run in ascending id order.
    struct CustomDetector {
        AnomalyType type;
        RulePtr rule;
        const DetectorPlugin* plugin = nullptr;
    };
    std::vector<CustomDetector> customs;
    for (const auto& r : config.custom_rules) {
        customs.push_back({AnomalyType::custom(r.id), parse_rule(r.rule), nullptr});
    }
    for (const auto& p : plugins) {
        if (!valid_custom_id(p.id) || !p.predicate) {
            throw Error(ErrorCode::InvalidConfig, "invalid detector plugin '" + p.id + "'");
        }
        customs.push_back({AnomalyType::custom(p.id), nullptr, &p});
    }
    std::sort(customs.begin(), customs.end(),
              [](const CustomDetector& a, const CustomDetector& b) { return a.type < b.type; });
    for (std::size_t i = 1; i < customs.size(); ++i) {
        if (customs[i].type == customs[i - 1].type) {
            throw Error(ErrorCode::InvalidConfig,
                        "duplicate custom detector id '" + customs[i].type.custom_id + "'");
        }
    }

    std::unordered_map<std::string, std::vector<KeyRows>> partitions;
    std::unordered_map<std::string, OutlierScan> outliers;

    Detection out;
    for (const auto& spec : specs) {
        validate_spec(table, spec);
        auto part_it = partitions.find(spec.group_by);
        if (part_it == partitions.end()) {
            part_it = partitions
                          .emplace(spec.group_by,
                                   partition_by(table, table.column_index(spec.group_by)))
                          .first;
        }
        auto out_it = outliers.find(spec.target);
        if (out_it == outliers.end()) {
            out_it = outliers
                         .emplace(spec.target,
                                  scan_outliers(table.column(spec.target), config.outlier_sigma))
                         .first;
        }
        const auto& scan = out_it->second;
        const auto& target = table.column(spec.target);

        for (const auto& part : part_it->second) {
            if (part.rows.size() < spec.min_support) continue;
            const GroupId id{spec.group_by, spec.target, part.key};
            std::optional<GroupStats> stats;
            if (!customs.empty()) {
                stats = group_stats(table, Group{spec, part.key, part.rows, table.version()});
            }
            for (std::size_t r : part.rows) {
                const auto& cell = target.cells[r];
                if (cell.is_missing()) {
                    out.records.push_back(
                        cell_record(kMissingValue, id, r, target.name, table.version()));
                }
                if (scan.deviation[r]) {
                    out.records.push_back(
                        outlier_record(id, r, target.name, scan, config.outlier_sigma, table.version()));
                }
                if (cell.is_text()) {
                    out.records.push_back(
                        cell_record(kTypeMismatch, id, r, target.name, table.version()));
                }
                for (const auto& custom : customs) {
                    const bool hit = custom.rule ? eval_rule(*custom.rule, cell, *stats)
                                                 : custom.plugin->predicate(cell, *stats);
                    if (hit) {
                        out.records.push_back(
                            cell_record(custom.type, id, r, target.name, table.version()));
                    }
                }
            }
            if (part.rows.size() < config.incomplete_threshold) {
                out.records.push_back(incomplete_record(
                    Group{spec, part.key, part.rows, table.version()}, config.incomplete_threshold));
            }
        }
    }
    out.index = build_index(out.records);
    return out;
}

}  // namespace corral
