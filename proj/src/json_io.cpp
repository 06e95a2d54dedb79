#include "corral/json_io.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>
#include <set>

namespace corral {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& problem) {
    throw Error(ErrorCode::BadRequest, path + ": " + problem);
}

void require_object(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) fail(path, "unexpected field '" + key + "'");
    }
}

auto field(const Json& j, const std::string& path, const char* name) -> const Json& {
    const auto it = j.find(name);
    if (it == j.end()) fail(path, std::string("missing field '") + name + "'");
    return *it;
}

auto get_string(const Json& j, const std::string& path) -> std::string {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

auto get_index(const Json& j, const std::string& path) -> std::size_t {
    if (!j.is_number_unsigned()) fail(path, "expected a non-negative integer");
    return j.get<std::size_t>();
}

auto get_number(const Json& j, const std::string& path) -> double {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "expected a finite number");
    return v;
}

auto cells_from_json(const Json& j, const std::string& path) -> std::vector<CellRef> {
    if (!j.is_array()) fail(path, "expected an array");
    std::vector<CellRef> cells;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        require_object(j[i], p, {"row", "column"});
        cells.push_back(CellRef{get_index(field(j[i], p, "row"), p + ".row"),
                                get_string(field(j[i], p, "column"), p + ".column")});
    }
    return cells;
}

auto cells_json(const std::vector<CellRef>& cells) -> Json {
    Json out = Json::array();
    for (const auto& c : cells) out.push_back(cell_ref_json(c));
    return out;
}

auto type_map_json(const std::map<AnomalyType, std::size_t>& m) -> Json {
    Json out = Json::object();
    for (const auto& [type, n] : m) out[type.name()] = n;
    return out;
}

}  // namespace

auto cell_value_json(const CellValue& v) -> Json {
    if (v.is_missing()) return nullptr;
    if (v.is_number()) return v.as_number();
    return v.as_text();
}

auto cell_ref_json(const CellRef& c) -> Json { return {{"row", c.row}, {"column", c.column}}; }

auto group_key_json(const GroupKey& key) -> Json { return key ? Json(*key) : Json(nullptr); }

auto group_id_json(const GroupId& id) -> Json {
    return {{"group_by", id.group_by}, {"target", id.target}, {"key", group_key_json(id.key)}};
}

auto group_id_from_json(const Json& j, const std::string& path) -> GroupId {
    require_object(j, path, {"group_by", "target", "key"});
    GroupId id;
    id.group_by = get_string(field(j, path, "group_by"), path + ".group_by");
    id.target = get_string(field(j, path, "target"), path + ".target");
    const auto& key = field(j, path, "key");
    if (!key.is_null()) id.key = get_string(key, path + ".key");
    return id;
}

auto spec_json(const GroupSpec& spec) -> Json {
    return {{"group_by", spec.group_by}, {"target", spec.target}, {"min_support", spec.min_support}};
}

auto spec_from_json(const Json& j, const std::string& path) -> GroupSpec {
    require_object(j, path, {"group_by", "target", "min_support"});
    GroupSpec spec;
    spec.group_by = get_string(field(j, path, "group_by"), path + ".group_by");
    spec.target = get_string(field(j, path, "target"), path + ".target");
    if (j.contains("min_support")) {
        spec.min_support = get_index(j["min_support"], path + ".min_support");
    }
    return spec;
}

auto config_json(const DetectorConfig& config) -> Json {
    Json rules = Json::array();
    for (const auto& r : config.custom_rules) rules.push_back({{"id", r.id}, {"rule", r.rule}});
    return {{"outlier_sigma", config.outlier_sigma},
            {"incomplete_threshold", config.incomplete_threshold},
            {"numeric_majority", config.numeric_majority},
            {"top_k", config.top_k},
            {"custom_rules", rules}};
}

auto config_from_json(const Json& j, const std::string& path) -> DetectorConfig {
    DetectorConfig config;
    if (j.is_null()) return config;
    require_object(j, path, {"outlier_sigma", "incomplete_threshold", "numeric_majority", "top_k", "custom_rules"});
    if (j.contains("outlier_sigma")) config.outlier_sigma = get_number(j["outlier_sigma"], path + ".outlier_sigma");
    if (j.contains("incomplete_threshold")) {
        config.incomplete_threshold = get_index(j["incomplete_threshold"], path + ".incomplete_threshold");
    }
    if (j.contains("numeric_majority")) {
        config.numeric_majority = get_number(j["numeric_majority"], path + ".numeric_majority");
    }
    if (j.contains("top_k")) config.top_k = get_index(j["top_k"], path + ".top_k");
    if (j.contains("custom_rules")) {
        const auto& rules = j["custom_rules"];
        if (!rules.is_array()) fail(path + ".custom_rules", "expected an array");
        for (std::size_t i = 0; i < rules.size(); ++i) {
            const std::string p = path + ".custom_rules[" + std::to_string(i) + "]";
            require_object(rules[i], p, {"id", "rule"});
            config.custom_rules.push_back(
                {get_string(field(rules[i], p, "id"), p + ".id"), get_string(field(rules[i], p, "rule"), p + ".rule")});
        }
    }
    validate_config(config);
    return config;
}

auto action_json(const RepairAction& action) -> Json {
    Json j;
    j["type"] = std::string(action_tag(action));
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, ImputeGroupMean>) {
                j["cells"] = cells_json(a.cells);
                j["group"] = group_id_json(a.group);
            } else if constexpr (std::is_same_v<T, ImputeColumnMean> || std::is_same_v<T, ConvertCells>) {
                j["cells"] = cells_json(a.cells);
            } else if constexpr (std::is_same_v<T, RemoveRows>) {
                j["rows"] = a.rows;
            } else if constexpr (std::is_same_v<T, MergeGroups>) {
                j["column"] = a.column;
                j["source_key"] = a.source_key;
                j["dest_key"] = a.dest_key;
            } else {
                j["wrangler"] = a.wrangler;
                j["cells"] = cells_json(a.cells);
                j["group"] = group_id_json(a.group);
            }
        },
        action);
    return j;
}

auto action_from_json(const Json& j, const std::string& path) -> RepairAction {
    if (!j.is_object()) fail(path, "expected an object");
    const std::string type = get_string(field(j, path, "type"), path + ".type");
    RepairAction action;
    if (type == "impute_group_mean") {
        require_object(j, path, {"type", "cells", "group"});
        action = ImputeGroupMean{cells_from_json(field(j, path, "cells"), path + ".cells"),
                                 group_id_from_json(field(j, path, "group"), path + ".group")};
    } else if (type == "impute_column_mean") {
        require_object(j, path, {"type", "cells"});
        action = ImputeColumnMean{cells_from_json(field(j, path, "cells"), path + ".cells")};
    } else if (type == "convert_cells") {
        require_object(j, path, {"type", "cells"});
        action = ConvertCells{cells_from_json(field(j, path, "cells"), path + ".cells")};
    } else if (type == "remove_rows") {
        require_object(j, path, {"type", "rows"});
        const auto& rows = field(j, path, "rows");
        if (!rows.is_array()) fail(path + ".rows", "expected an array");
        RemoveRows a;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            a.rows.push_back(get_index(rows[i], path + ".rows[" + std::to_string(i) + "]"));
        }
        action = std::move(a);
    } else if (type == "merge_groups") {
        require_object(j, path, {"type", "column", "source_key", "dest_key"});
        action = MergeGroups{get_string(field(j, path, "column"), path + ".column"),
                             get_string(field(j, path, "source_key"), path + ".source_key"),
                             get_string(field(j, path, "dest_key"), path + ".dest_key")};
    } else if (type == "custom") {
        require_object(j, path, {"type", "wrangler", "cells", "group"});
        action = CustomWrangle{get_string(field(j, path, "wrangler"), path + ".wrangler"),
                               cells_from_json(field(j, path, "cells"), path + ".cells"),
                               group_id_from_json(field(j, path, "group"), path + ".group")};
    } else {
        fail(path + ".type", "unknown action type '" + type + "'");
    }
    normalize_action(action);
    return action;
}

auto recipe_from_json(const Json& j) -> std::vector<RepairAction> {
    const Json* list = &j;
    std::string path = "recipe";
    if (j.is_object()) {
        if (!j.contains("actions")) fail(path, "missing field 'actions'");
        list = &j["actions"];
        path = "recipe.actions";
    }
    if (!list->is_array()) fail(path, "expected an array of actions");
    std::vector<RepairAction> actions;
    for (std::size_t i = 0; i < list->size(); ++i) {
        actions.push_back(action_from_json((*list)[i], path + "[" + std::to_string(i) + "]"));
    }
    return actions;
}

auto recipe_json(std::span<const RepairAction> actions) -> Json {
    Json out = Json::array();
    for (const auto& a : actions) out.push_back(action_json(a));
    return out;
}

auto record_json(const AnomalyRecord& record) -> Json {
    Json detail = Json::object();
    for (const auto& [k, v] : record.detail) detail[k] = v;
    return {{"type", record.type.name()},
            {"group", group_id_json(record.group)},
            {"cells", cells_json(record.cells)},
            {"detail", detail},
            {"version", record.version}};
}

auto ranked_group_json(const RankedGroup& group) -> Json {
    return {{"group", group_id_json(group.group)},
            {"label", group.group.label()},
            {"total_anomalies", group.total_anomalies},
            {"per_type", type_map_json(group.per_type)},
            {"dominant_type", group.dominant_type.name()}};
}

auto attribute_summary_json(const AttributeSummary& summary) -> Json {
    Json freq = Json::object();
    for (const auto& [type, f] : summary.per_type_frequency) freq[type.name()] = f;
    return {{"column", summary.column},
            {"per_type_counts", type_map_json(summary.per_type_counts)},
            {"per_type_frequency", freq},
            {"score", summary.score}};
}

auto chart_payload_json(const ChartPayload& p) -> Json {
    auto point_json = [](const ChartPoint& pt) {
        Json types = Json::array();
        for (const auto& t : pt.anomalies) types.push_back(t.name());
        return Json{{"row", pt.row},
                    {"value", pt.value},
                    {"key", pt.key},
                    {"color_class", pt.color_class},
                    {"anomalies", types}};
    };

    Json j;
    j["schema_version"] = 1;
    j["chart_kind"] = std::string(chart_kind_name(p.kind));
    j["mode"] = std::string(color_mode_name(p.mode));
    j["spec"] = spec_json(p.spec);
    j["version"] = p.version;

    Json legend = Json::array();
    for (const auto& e : p.legend) {
        Json entry{{"key", e.key}, {"color_class", e.color_class}};
        if (p.mode == ColorMode::GroupName) entry["group_key"] = e.group_key ? Json(*e.group_key) : Json(nullptr);
        if (p.mode == ColorMode::ErrorType) entry["type"] = e.type ? Json(*e.type) : Json(nullptr);
        legend.push_back(std::move(entry));
    }
    j["legend"] = legend;

    switch (p.kind) {
        case ChartKind::StackedHistogram: {
            j["edges"] = p.edges;
            Json bins = Json::array();
            for (const auto& b : p.bins) {
                Json segs = Json::array();
                for (const auto& s : b.segments) {
                    segs.push_back({{"key", s.key}, {"count", s.count}, {"color_class", s.color_class}});
                }
                bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"segments", segs}});
            }
            j["bins"] = bins;
            break;
        }
        case ChartKind::Scatter: {
            Json pts = Json::array();
            for (const auto& pt : p.points) pts.push_back(point_json(pt));
            j["points"] = pts;
            break;
        }
        case ChartKind::Line: {
            Json series = Json::array();
            for (const auto& s : p.series) {
                Json pts = Json::array();
                for (const auto& pt : s.points) pts.push_back(point_json(pt));
                series.push_back({{"key", s.key}, {"color_class", s.color_class}, {"points", pts}});
            }
            j["series"] = series;
            break;
        }
        case ChartKind::Heatmap: {
            j["edges"] = p.edges;
            j["rows"] = p.rows;
            Json cells = Json::array();
            for (const auto& c : p.cells) {
                cells.push_back({{"row", c.group}, {"bin", c.bin}, {"count", c.count}, {"color_class", c.color_class}});
            }
            j["cells"] = cells;
            break;
        }
    }

    Json marks = Json::array();
    for (const auto& m : p.anomaly_marks) {
        marks.push_back({{"cell", cell_ref_json(m.cell)}, {"type", m.type.name()}});
    }
    j["anomaly_marks"] = marks;
    return j;
}

auto anomaly_delta_json(const AnomalyDelta& delta) -> Json {
    Json out = Json::object();
    for (const auto& [type, counts] : delta) {
        out[type.name()] = {{"before", counts.first}, {"after", counts.second}};
    }
    return out;
}

auto diff_json(const ActionDiff& diff) -> Json {
    Json groups = Json::array();
    for (const auto& g : diff.affected_groups) groups.push_back(group_id_json(g));
    Json shifts = Json::array();
    for (const auto& [g, shift] : diff.mean_shift) {
        shifts.push_back({{"group", group_id_json(g)}, {"shift", shift}});
    }
    return {{"cells_changed", diff.cells_changed},
            {"rows_removed", diff.rows_removed},
            {"affected_groups", groups},
            {"mean_shift", shifts},
            {"anomaly_delta", anomaly_delta_json(diff.anomaly_delta)}};
}

auto table_schema_json(const Table& table) -> Json {
    Json cols = Json::array();
    for (std::size_t c = 0; c < table.column_count(); ++c) {
        const auto& col = table.column(c);
        cols.push_back({{"name", col.name}, {"kind", std::string(column_kind_name(col.kind))}});
    }
    return cols;
}

auto anomaly_summary_json(const Detection& detection) -> Json {
    Json per_type = Json::object();
    for (const auto& [type, n] : count_by_type(detection.records)) per_type[type.name()] = n;
    return {{"total", detection.records.size()}, {"per_type", per_type}};
}

auto anomalies_report_json(const Session& session, std::size_t top_k) -> Json {
    Json ranked = Json::array();
    for (const auto& g : rank_groups(session.detection().index, top_k)) ranked.push_back(ranked_group_json(g));
    Json records = Json::array();
    const auto& recs = session.detection().records;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        Json r = record_json(recs[i]);
        r["index"] = i;
        records.push_back(std::move(r));
    }
    return {{"version", session.version()}, {"top_k", top_k}, {"ranked", ranked}, {"records", records}};
}

auto summary_report_json(const Session& session) -> Json {
    Json attrs = Json::array();
    for (const auto& a : attribute_summary(session.table(), session.detection().records)) {
        attrs.push_back(attribute_summary_json(a));
    }
    return {{"version", session.version()}, {"attributes", attrs}};
}

auto session_export_json(const Session& session) -> Json {
    Json specs = Json::array();
    for (const auto& s : session.specs()) specs.push_back(spec_json(s));
    const auto actions = session.actions();
    return {{"fingerprint", session.source().fingerprint},
            {"source", session.source().name},
            {"null_tokens", session.source().csv.null_tokens},
            {"config", config_json(session.config())},
            {"specs", specs},
            {"version", session.version()},
            {"actions", recipe_json(actions)}};
}

auto error_json(const Error& error) -> Json {
    Json j{{"code", std::string(error_code_name(error.code()))}, {"message", error.what()}};
    if (const auto* csv = dynamic_cast<const CsvError*>(&error)) {
        j["detail"] = {{"row", csv->row()}, {"reason", csv->reason()}};
    } else if (const auto* rule = dynamic_cast<const RuleSyntaxError*>(&error)) {
        j["detail"] = {{"position", rule->position()}, {"expected", rule->expected()}};
    }
    return j;
}

}  // namespace corral
