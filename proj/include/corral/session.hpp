#pragma once

#include "corral/anomaly.hpp"
#include "corral/groups.hpp"
#include "corral/repair.hpp"
#include "corral/table.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace corral {

struct ActionEntry {
    RepairAction action;
    InverseRecord inverse;
    std::uint64_t pre_version = 0;
    std::uint64_t post_version = 0;
    std::chrono::system_clock::time_point timestamp;
};

/// Where the original table came from.
struct SourceInfo {
    std::string name;         // file name or upload label
    std::string fingerprint;  // sha256 of the raw bytes
    CsvOptions csv;
};

struct SessionOptions {
    std::shared_ptr<const WranglerRegistry> wranglers;
    std::vector<DetectorPlugin> plugins;
    SimilarityFn similarity;
    double min_similarity = kDefaultMinSimilarity;
};

/// Anomaly counts per type, before and after a change.
using AnomalyDelta = std::map<AnomalyType, std::pair<std::size_t, std::size_t>>;

auto count_by_type(std::span<const AnomalyRecord> records) -> std::map<AnomalyType, std::size_t>;
auto anomaly_delta(std::span<const AnomalyRecord> before, std::span<const AnomalyRecord> after)
    -> AnomalyDelta;

/// A wrangling session with linear undo/redo history. Every mutation either
/// succeeds completely or leaves the session untouched.
class Session {
public:
    /// Detection runs immediately; specs are validated against `original`.
    Session(std::string id, Table original, DetectorConfig config, std::vector<GroupSpec> specs,
            SourceInfo source = {}, SessionOptions options = {});

    [[nodiscard]] auto id() const -> const std::string& { return id_; }
    [[nodiscard]] auto table() const -> const Table& { return table_; }
    [[nodiscard]] auto original() const -> const Table& { return original_; }
    [[nodiscard]] auto config() const -> const DetectorConfig& { return config_; }
    [[nodiscard]] auto specs() const -> const std::vector<GroupSpec>& { return specs_; }
    [[nodiscard]] auto source() const -> const SourceInfo& { return source_; }
    [[nodiscard]] auto options() const -> const SessionOptions& { return options_; }
    [[nodiscard]] auto undo_stack() const -> const std::vector<ActionEntry>& { return undo_; }
    [[nodiscard]] auto redo_stack() const -> const std::vector<ActionEntry>& { return redo_; }
    [[nodiscard]] auto detection() const -> const Detection& { return detection_; }
    [[nodiscard]] auto version() const -> std::uint64_t { return table_.version(); }

    /// Committed actions in order (redo stack excluded).
    [[nodiscard]] auto actions() const -> std::vector<RepairAction>;

    /// Applies the action; clears the redo stack. Returns the diff including
    /// anomaly deltas.
    auto commit(RepairAction action) -> ActionDiff;
    /// Throw NothingToUndo / NothingToRedo on an empty stack.
    auto undo() -> AnomalyDelta;
    auto redo() -> AnomalyDelta;

    /// What commit would report, without changing anything.
    [[nodiscard]] auto preview(RepairAction action) const -> ActionDiff;

    /// Groups of `spec` at the current version (all keys, min_support applied).
    [[nodiscard]] auto groups_of(const GroupSpec& spec) const -> std::vector<Group>;

    /// Repair candidates for a record of the current detection.
    [[nodiscard]] auto suggest(const AnomalyRecord& record) const -> std::vector<RepairAction>;

private:
    [[nodiscard]] auto detect(const Table& table) const -> Detection;
    [[nodiscard]] auto wranglers() const -> const WranglerRegistry* { return options_.wranglers.get(); }

    std::string id_;
    Table original_;
    Table table_;
    DetectorConfig config_;
    std::vector<GroupSpec> specs_;
    SourceInfo source_;
    SessionOptions options_;
    std::vector<ActionEntry> undo_;
    std::vector<ActionEntry> redo_;
    Detection detection_;
};

/// Random 128-bit hex id.
auto new_session_id() -> std::string;

/// Builds a session with a fresh id. An empty spec list yields a session
/// with no anomalies.
auto create_session(Table table, DetectorConfig config, std::vector<GroupSpec> specs,
                    SourceInfo source = {}, SessionOptions options = {}) -> Session;

/// Rebuilds a session by committing `actions` in order.
auto replay_session(Table original, DetectorConfig config, std::vector<GroupSpec> specs,
                    std::span<const RepairAction> actions, SourceInfo source = {},
                    SessionOptions options = {}) -> Session;

}  // namespace corral
