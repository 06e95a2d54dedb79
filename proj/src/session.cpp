#include "corral/session.hpp"

#include "corral/error.hpp"

#include <array>
#include <random>

namespace corral {

auto count_by_type(std::span<const AnomalyRecord> records) -> std::map<AnomalyType, std::size_t> {
    std::map<AnomalyType, std::size_t> out;
    for (const auto& r : records) ++out[r.type];
    return out;
}

auto anomaly_delta(std::span<const AnomalyRecord> before, std::span<const AnomalyRecord> after)
    -> AnomalyDelta {
    AnomalyDelta delta;
    for (const auto& [type, n] : count_by_type(before)) delta[type].first = n;
    for (const auto& [type, n] : count_by_type(after)) delta[type].second = n;
    return delta;
}

Session::Session(std::string id, Table original, DetectorConfig config, std::vector<GroupSpec> specs,
                 SourceInfo source, SessionOptions options)
    : id_(std::move(id)),
      original_(std::move(original)),
      table_(original_),
      config_(std::move(config)),
      specs_(std::move(specs)),
      source_(std::move(source)),
      options_(std::move(options)) {
    for (const auto& spec : specs_) validate_spec(table_, spec);
    detection_ = detect(table_);
}

auto Session::detect(const Table& table) const -> Detection {
    return run_detectors(table, specs_, config_, options_.plugins);
}

auto Session::actions() const -> std::vector<RepairAction> {
    std::vector<RepairAction> out;
    out.reserve(undo_.size());
    for (const auto& e : undo_) out.push_back(e.action);
    return out;
}

auto Session::commit(RepairAction action) -> ActionDiff {
    normalize_action(action);
    auto result = apply_action(table_, action, specs_, wranglers());
    auto next = detect(result.table);
    result.diff.anomaly_delta = anomaly_delta(detection_.records, next.records);

    ActionEntry entry{std::move(action), std::move(result.inverse), table_.version(),
                      result.table.version(), std::chrono::system_clock::now()};
    undo_.reserve(undo_.size() + 1);
    // Nothing below can throw except allocation, which the reserve covers.
    undo_.push_back(std::move(entry));
    redo_.clear();
    table_ = std::move(result.table);
    detection_ = std::move(next);
    return result.diff;
}

auto Session::undo() -> AnomalyDelta {
    if (undo_.empty()) throw Error(ErrorCode::NothingToUndo, "nothing to undo");
    const auto& entry = undo_.back();
    Table prior = apply_inverse(table_, entry.inverse);
    auto next = detect(prior);
    auto delta = anomaly_delta(detection_.records, next.records);

    redo_.reserve(redo_.size() + 1);
    redo_.push_back(std::move(undo_.back()));
    undo_.pop_back();
    table_ = std::move(prior);
    detection_ = std::move(next);
    return delta;
}

auto Session::redo() -> AnomalyDelta {
    if (redo_.empty()) throw Error(ErrorCode::NothingToRedo, "nothing to redo");
    const auto& entry = redo_.back();
    auto result = apply_action(table_, entry.action, {}, wranglers());
    auto next = detect(result.table);
    auto delta = anomaly_delta(detection_.records, next.records);

    undo_.reserve(undo_.size() + 1);
    ActionEntry redone = std::move(redo_.back());
    redone.inverse = std::move(result.inverse);
    redone.timestamp = std::chrono::system_clock::now();
    redo_.pop_back();
    undo_.push_back(std::move(redone));
    table_ = std::move(result.table);
    detection_ = std::move(next);
    return delta;
}

auto Session::preview(RepairAction action) const -> ActionDiff {
    normalize_action(action);
    auto result = apply_action(table_, action, specs_, wranglers());
    result.diff.anomaly_delta = anomaly_delta(detection_.records, detect(result.table).records);
    return result.diff;
}

auto Session::groups_of(const GroupSpec& spec) const -> std::vector<Group> {
    return enumerate_groups(table_, spec).groups;
}

auto Session::suggest(const AnomalyRecord& record) const -> std::vector<RepairAction> {
    SuggestOptions opts;
    opts.min_similarity = options_.min_similarity;
    opts.similarity = options_.similarity;
    opts.wranglers = wranglers();
    const GroupSpec* spec = nullptr;
    for (const auto& s : specs_) {
        if (s.group_by == record.group.group_by && s.target == record.group.target) spec = &s;
    }
    if (spec == nullptr) {
        throw Error(ErrorCode::StaleRecord, "record group " + record.group.label() + " is not in this session");
    }
    const auto groups = groups_of(*spec);
    return suggest_repairs(record, table_, groups, opts);
}

auto new_session_id() -> std::string {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 2; ++i) {
        auto word = rng();
        for (int k = 0; k < 16; ++k) {
            id.push_back(kHex[word & 0xF]);
            word >>= 4;
        }
    }
    return id;
}

auto create_session(Table table, DetectorConfig config, std::vector<GroupSpec> specs, SourceInfo source,
                    SessionOptions options) -> Session {
    return Session(new_session_id(), std::move(table), std::move(config), std::move(specs),
                   std::move(source), std::move(options));
}

auto replay_session(Table original, DetectorConfig config, std::vector<GroupSpec> specs,
                    std::span<const RepairAction> actions, SourceInfo source, SessionOptions options)
    -> Session {
    auto session = create_session(std::move(original), std::move(config), std::move(specs),
                                  std::move(source), std::move(options));
    for (std::size_t i = 0; i < actions.size(); ++i) {
        try {
            session.commit(actions[i]);
        } catch (const Error& e) {
            throw Error(e.code(), "action " + std::to_string(i) + ": " + e.what());
        }
    }
    return session;
}

}  // namespace corral
