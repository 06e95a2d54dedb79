#pragma once

#include "corral/anomaly.hpp"
#include "corral/error.hpp"
#include "corral/insight.hpp"
#include "corral/repair.hpp"
#include "corral/session.hpp"

#include <json.hpp>

#include <span>
#include <vector>

namespace corral {

using Json = nlohmann::json;

// Parsers below throw Error(BadRequest) with a "path: problem" message when
// the document does not match the wire format.

auto cell_value_json(const CellValue& v) -> Json;
auto cell_ref_json(const CellRef& c) -> Json;
auto group_key_json(const GroupKey& key) -> Json;
auto group_id_json(const GroupId& id) -> Json;
auto group_id_from_json(const Json& j, const std::string& path = "group") -> GroupId;

auto spec_json(const GroupSpec& spec) -> Json;
auto spec_from_json(const Json& j, const std::string& path = "spec") -> GroupSpec;

auto config_json(const DetectorConfig& config) -> Json;
/// Missing fields keep their defaults; the result is validated.
auto config_from_json(const Json& j, const std::string& path = "config") -> DetectorConfig;

auto action_json(const RepairAction& action) -> Json;
/// The parsed action is normalized (lists sorted, duplicates dropped).
auto action_from_json(const Json& j, const std::string& path = "action") -> RepairAction;

/// A recipe is an array of actions, or an object with an "actions" array
/// (session exports qualify).
auto recipe_from_json(const Json& j) -> std::vector<RepairAction>;
auto recipe_json(std::span<const RepairAction> actions) -> Json;

auto record_json(const AnomalyRecord& record) -> Json;
auto ranked_group_json(const RankedGroup& group) -> Json;
auto attribute_summary_json(const AttributeSummary& summary) -> Json;
auto chart_payload_json(const ChartPayload& payload) -> Json;
auto anomaly_delta_json(const AnomalyDelta& delta) -> Json;
auto diff_json(const ActionDiff& diff) -> Json;
auto table_schema_json(const Table& table) -> Json;

/// {total, per_type} over the session's current records.
auto anomaly_summary_json(const Detection& detection) -> Json;

/// Body of GET /anomalies: {version, top_k, ranked, records}. Records carry
/// their position as "index".
auto anomalies_report_json(const Session& session, std::size_t top_k) -> Json;

/// Body of GET /summary: {version, attributes}.
auto summary_report_json(const Session& session) -> Json;

/// {fingerprint, source, config, specs, actions}; enough to replay.
auto session_export_json(const Session& session) -> Json;

/// {code, message, detail?}; detail carries row/reason for CSV errors and
/// position/expected for rule syntax errors.
auto error_json(const Error& error) -> Json;

}  // namespace corral
