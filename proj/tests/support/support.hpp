#pragma once

// Shared test helpers: random inputs, brute-force oracles, a JSON-schema
// subset validator and a python3 runner.

#include "corral/anomaly.hpp"
#include "corral/json_io.hpp"
#include "corral/session.hpp"
#include "corral/table.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace corral::test {

using Rng = std::mt19937_64;

auto fixture_path(const std::string& name) -> std::string;
auto read_text(const std::filesystem::path& path) -> std::string;
void write_text(const std::filesystem::path& path, const std::string& text);

/// Loads a fixture CSV and infers kinds.
auto load_fixture(const std::string& name) -> Table;

/// Names, kinds and every cell equal bit for bit (versions not compared).
auto same_cells(const Table& a, const Table& b) -> bool;

// ---------------------------------------------------------------------------
// Generators

struct RandomTableOptions {
    std::size_t max_rows = 200;
    std::size_t max_cols = 6;
};

/// CSV text with at least one categorical and one numeric column. Planted
/// anomalies: missing target cells, text in numeric columns, extreme values,
/// rare keys and missing keys.
auto random_csv(Rng& rng, const RandomTableOptions& options = {}) -> std::string;

auto random_config(Rng& rng) -> DetectorConfig;

/// A random action plausible for the session's current state: a suggestion
/// for a random record, or a hand-built removal, imputation, conversion or
/// merge. nullopt when nothing applicable was found.
auto random_action(Rng& rng, const Session& session) -> std::optional<RepairAction>;

/// Session over a random table with every spec enumerated; the CSV text is
/// stored in `csv_out` when given.
auto random_session(Rng& rng, const RandomTableOptions& options = {}, std::string* csv_out = nullptr) -> Session;

// ---------------------------------------------------------------------------
// Oracles

/// (group_by, target, key, row); row is -1 for group-level records.
using Flag = std::tuple<std::string, std::string, GroupKey, long>;
using FlagSets = std::map<std::string, std::set<Flag>>;

/// Brute-force scan with the default detectors over every spec.
auto oracle_scan(const Table& table, const std::vector<GroupSpec>& specs, const DetectorConfig& config)
    -> FlagSets;

auto flag_sets(const std::vector<AnomalyRecord>& records) -> FlagSets;

/// Size of the symmetric difference, per type, summed.
auto disagreements(const FlagSets& a, const FlagSets& b) -> std::size_t;

/// Violations of the by_type / by_group transpose and count invariants.
auto index_violations(const Detection& detection) -> std::vector<std::string>;

/// Full-matrix edit distance over code points.
auto edit_distance(const std::u32string& a, const std::u32string& b) -> std::size_t;

/// Bin counts by linear scan; the last bin is closed on the right.
auto bin_counts(const std::vector<double>& values, const std::vector<double>& edges) -> std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// JSON schema (draft-07 subset: type, properties, required,
// additionalProperties, items, enum, minimum, maximum, exclusiveMinimum,
// minItems, pattern, oneOf, anyOf, $ref to #/definitions).

class SchemaValidator {
public:
    explicit SchemaValidator(Json root);

    /// Empty when `doc` matches definitions/<definition>.
    [[nodiscard]] auto validate(const Json& doc, const std::string& definition) const -> std::vector<std::string>;

private:
    void check(const Json& doc, const Json& schema, const std::string& path, std::vector<std::string>& errors) const;
    [[nodiscard]] auto resolve(const Json& schema) const -> const Json&;

    Json root_;
};

auto api_schema() -> const SchemaValidator&;

// ---------------------------------------------------------------------------
// Scripts

auto python3_available() -> bool;

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    auto operator=(const TempDir&) -> TempDir& = delete;

    [[nodiscard]] auto path() const -> const std::filesystem::path& { return path_; }
    [[nodiscard]] auto file(const std::string& name) const -> std::filesystem::path { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Runs `script` on `input_csv` and returns the output CSV, or nullopt with
/// stderr in `error` when the script fails.
auto run_script(const std::string& script, const std::string& input_csv, std::string* error = nullptr)
    -> std::optional<std::string>;

/// Loads script output and coerces it to the kinds of `like`.
auto load_like(const std::string& csv, const Table& like, const CsvOptions& options = {}) -> Table;

}  // namespace corral::test
