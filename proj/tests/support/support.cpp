#include "support.hpp"

#include "corral/hash.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#ifndef CORRAL_SOURCE_DIR
#error "CORRAL_SOURCE_DIR must be defined by the build"
#endif

namespace corral::test {

namespace fs = std::filesystem;

auto fixture_path(const std::string& name) -> std::string {
    return std::string(CORRAL_SOURCE_DIR) + "/data/fixtures/" + name;
}

auto read_text(const fs::path& path) -> std::string {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

auto load_fixture(const std::string& name) -> Table {
    return infer_kinds(load_csv(read_text(fixture_path(name)), {}, name));
}

auto same_cells(const Table& a, const Table& b) -> bool {
    if (a.column_count() != b.column_count() || a.row_count() != b.row_count()) return false;
    for (std::size_t c = 0; c < a.column_count(); ++c) {
        const auto& x = a.column(c);
        const auto& y = b.column(c);
        if (x.name != y.name || x.kind != y.kind || !(x.cells == y.cells)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Generators

namespace {

auto pick(Rng& rng, std::size_t n) -> std::size_t {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

auto chance(Rng& rng, double p) -> bool { return std::bernoulli_distribution(p)(rng); }

auto csv_field(const std::string& s) -> std::string {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

auto render(double v, bool integer) -> std::string {
    if (integer) v = std::round(v);
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
    return std::string(buf, end);
}

const std::vector<std::string> kKeyPool = {"Bhutan", "Lesotho", "Peru",  "Chad",    "Fiji",
                                           "Oman",   "Nepal",   "Laos",  "Benin",   "Tonga",
                                           "Acme, Inc", "\"Q\" Ltd", "Mali", "Niger", "Yemen"};
const std::vector<std::string> kPlantedText = {"abc", "12k", "n/a?", "$5", "1,200", "x9", "--"};

}  // namespace

auto random_csv(Rng& rng, const RandomTableOptions& options) -> std::string {
    const std::size_t rows = 1 + pick(rng, options.max_rows);
    const std::size_t cols = 2 + pick(rng, options.max_cols - 1);
    const std::size_t categorical = 1 + pick(rng, cols - 1);

    struct Gen {
        std::string name;
        bool categorical = false;
        std::vector<std::string> cells;
    };
    std::vector<Gen> gens;
    for (std::size_t c = 0; c < cols; ++c) {
        Gen g;
        g.categorical = c < categorical;
        g.name = (g.categorical ? "cat" : "num") + std::to_string(c);
        if (g.categorical) {
            const std::size_t k = 1 + pick(rng, 6);
            std::vector<std::string> keys;
            for (std::size_t i = 0; i < k; ++i) keys.push_back(kKeyPool[pick(rng, kKeyPool.size())]);
            std::vector<double> weights;
            for (std::size_t i = 0; i < k; ++i) weights.push_back(std::pow(0.6, static_cast<double>(i)));
            std::discrete_distribution<std::size_t> which(weights.begin(), weights.end());
            for (std::size_t r = 0; r < rows; ++r) {
                if (chance(rng, 0.03)) {
                    g.cells.push_back("");
                } else {
                    g.cells.push_back(keys[which(rng)]);
                }
            }
            // Rare keys plant small groups.
            const std::size_t rare = pick(rng, 3);
            for (std::size_t i = 0; i < rare; ++i) g.cells[pick(rng, rows)] = "Rare" + std::to_string(pick(rng, 4));
        } else {
            const double mean = std::uniform_real_distribution<double>(-500.0, 5000.0)(rng);
            const double spread = std::uniform_real_distribution<double>(0.5, 300.0)(rng);
            const bool integer = chance(rng, 0.4);
            const bool constant = chance(rng, 0.08);
            std::normal_distribution<double> normal(mean, spread);
            for (std::size_t r = 0; r < rows; ++r) {
                const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                if (r == 0 || constant) {
                    g.cells.push_back(render(constant ? mean : normal(rng), integer || constant));
                } else if (u < 0.05) {
                    g.cells.push_back(chance(rng, 0.7) ? "" : "NA");
                } else if (u < 0.09) {
                    g.cells.push_back(kPlantedText[pick(rng, kPlantedText.size())]);
                } else if (u < 0.12) {
                    const double sign = chance(rng, 0.5) ? 1.0 : -1.0;
                    g.cells.push_back(render(mean + sign * spread * std::uniform_real_distribution<double>(6.0, 30.0)(rng), integer));
                } else {
                    g.cells.push_back(render(normal(rng), integer));
                }
            }
        }
        gens.push_back(std::move(g));
    }
    std::shuffle(gens.begin(), gens.end(), rng);

    std::string csv;
    for (std::size_t c = 0; c < cols; ++c) csv += (c ? "," : "") + gens[c].name;
    csv += "\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) csv += (c ? "," : "") + csv_field(gens[c].cells[r]);
        csv += "\n";
    }
    return csv;
}

auto random_config(Rng& rng) -> DetectorConfig {
    static const std::vector<double> sigmas = {1.0, 1.5, 2.0, 2.5, 3.0};
    DetectorConfig config;
    config.outlier_sigma = sigmas[pick(rng, sigmas.size())];
    config.incomplete_threshold = 1 + pick(rng, 4);
    config.top_k = 1 + pick(rng, 5);
    return config;
}

auto random_session(Rng& rng, const RandomTableOptions& options, std::string* csv_out) -> Session {
    const std::string csv = random_csv(rng, options);
    if (csv_out) *csv_out = csv;
    Table table = infer_kinds(load_csv(csv, {}, "random.csv"));
    auto specs = enumerate_all_specs(table, std::nullopt, 1 + pick(rng, 2));
    return create_session(std::move(table), random_config(rng), std::move(specs),
                          SourceInfo{"random.csv", sha256_hex(csv), {}});
}

auto random_action(Rng& rng, const Session& session) -> std::optional<RepairAction> {
    const Table& t = session.table();
    if (t.row_count() == 0) return std::nullopt;
    std::vector<std::size_t> numeric;
    std::vector<std::size_t> categorical;
    for (std::size_t c = 0; c < t.column_count(); ++c) {
        (t.column(c).kind == ColumnKind::Numeric ? numeric : categorical).push_back(c);
    }
    auto random_rows = [&] {
        std::vector<std::size_t> rows;
        const std::size_t n = 1 + pick(rng, 3);
        for (std::size_t i = 0; i < n; ++i) rows.push_back(pick(rng, t.row_count()));
        return rows;
    };

    std::optional<RepairAction> action;
    switch (pick(rng, 7)) {
        case 0:
        case 1:
        case 2: {
            const auto& records = session.detection().records;
            if (records.empty()) break;
            try {
                const auto options = session.suggest(records[pick(rng, records.size())]);
                if (!options.empty()) action = options[pick(rng, options.size())];
            } catch (const Error&) {
            }
            break;
        }
        case 3:
            if (t.row_count() > 1) action = RemoveRows{random_rows()};
            break;
        case 4: {
            if (numeric.empty()) break;
            const auto& name = t.column(numeric[pick(rng, numeric.size())]).name;
            ImputeColumnMean a;
            for (auto r : random_rows()) a.cells.push_back({r, name});
            action = a;
            break;
        }
        case 5: {
            if (categorical.empty()) break;
            const auto& col = t.column(categorical[pick(rng, categorical.size())]);
            std::vector<std::string> keys;
            for (const auto& cell : col.cells) {
                if (cell.is_text() && std::find(keys.begin(), keys.end(), cell.as_text()) == keys.end()) {
                    keys.push_back(cell.as_text());
                }
            }
            if (keys.size() < 2) break;
            const std::size_t a = pick(rng, keys.size());
            std::size_t b = pick(rng, keys.size() - 1);
            if (b >= a) ++b;
            action = MergeGroups{col.name, keys[a], keys[b]};
            break;
        }
        case 6: {
            std::vector<CellRef> text_cells;
            for (auto c : numeric) {
                const auto& col = t.column(c);
                for (std::size_t r = 0; r < col.cells.size(); ++r) {
                    if (col.cells[r].is_text() && convert_numeric_string(col.cells[r].as_text())) {
                        text_cells.push_back({r, col.name});
                    }
                }
            }
            if (text_cells.empty()) break;
            action = ConvertCells{{text_cells[pick(rng, text_cells.size())]}};
            break;
        }
    }
    if (action) normalize_action(*action);
    return action;
}

// ---------------------------------------------------------------------------
// Oracles

namespace {

auto oracle_key(const CellValue& v) -> GroupKey {
    if (v.is_missing()) return std::nullopt;
    if (v.is_text()) return v.as_text();
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v.as_number());
    return std::string(buf, end);
}

}  // namespace

auto oracle_scan(const Table& table, const std::vector<GroupSpec>& specs, const DetectorConfig& config)
    -> FlagSets {
    FlagSets out;
    out["missing_value"];
    out["outlier"];
    out["type_mismatch"];
    out["incomplete_group"];
    for (const auto& spec : specs) {
        const auto& by = table.column(spec.group_by).cells;
        const auto& target = table.column(spec.target).cells;

        std::vector<std::pair<GroupKey, std::vector<long>>> groups;
        for (std::size_t r = 0; r < by.size(); ++r) {
            const GroupKey key = oracle_key(by[r]);
            auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
            if (it == groups.end()) {
                groups.push_back({key, {}});
                it = groups.end() - 1;
            }
            it->second.push_back(static_cast<long>(r));
        }

        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& cell : target) {
            if (cell.is_number()) {
                sum += cell.as_number();
                ++n;
            }
        }
        const double mean = n ? sum / static_cast<double>(n) : 0.0;
        double sq = 0.0;
        for (const auto& cell : target) {
            if (cell.is_number()) sq += (cell.as_number() - mean) * (cell.as_number() - mean);
        }
        const double sd = n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;

        for (const auto& [key, rows] : groups) {
            if (rows.size() < spec.min_support) continue;
            for (long r : rows) {
                const auto& cell = target[static_cast<std::size_t>(r)];
                const Flag f{spec.group_by, spec.target, key, r};
                if (cell.is_missing()) out["missing_value"].insert(f);
                if (cell.is_text()) out["type_mismatch"].insert(f);
                if (cell.is_number() && sd > 0.0 && std::fabs(cell.as_number() - mean) > config.outlier_sigma * sd) {
                    out["outlier"].insert(f);
                }
            }
            if (rows.size() < config.incomplete_threshold) {
                out["incomplete_group"].insert(Flag{spec.group_by, spec.target, key, -1});
            }
        }
    }
    return out;
}

auto flag_sets(const std::vector<AnomalyRecord>& records) -> FlagSets {
    FlagSets out;
    out["missing_value"];
    out["outlier"];
    out["type_mismatch"];
    out["incomplete_group"];
    for (const auto& r : records) {
        const long row = r.cells.empty() ? -1 : static_cast<long>(r.cells.front().row);
        out[r.type.name()].insert(Flag{r.group.group_by, r.group.target, r.group.key, row});
    }
    return out;
}

auto disagreements(const FlagSets& a, const FlagSets& b) -> std::size_t {
    std::set<std::string> types;
    for (const auto& [t, s] : a) types.insert(t);
    for (const auto& [t, s] : b) types.insert(t);
    std::size_t n = 0;
    for (const auto& t : types) {
        static const std::set<Flag> empty;
        const auto& sa = a.count(t) ? a.at(t) : empty;
        const auto& sb = b.count(t) ? b.at(t) : empty;
        std::vector<Flag> diff;
        std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(diff));
        n += diff.size();
    }
    return n;
}

auto index_violations(const Detection& detection) -> std::vector<std::string> {
    std::vector<std::string> v;
    const auto& idx = detection.index;
    for (const auto& [type, groups] : idx.by_type) {
        if (groups.empty()) v.push_back("empty by_type entry for " + type.name());
        for (const auto& g : groups) {
            const auto it = idx.by_group.find(g);
            if (it == idx.by_group.end() || !it->second.count(type)) {
                v.push_back("by_type has " + g.label() + "/" + type.name() + " but by_group does not");
            }
        }
    }
    for (const auto& [g, types] : idx.by_group) {
        if (types.empty()) v.push_back("empty by_group entry for " + g.label());
        for (const auto& type : types) {
            const auto it = idx.by_type.find(type);
            if (it == idx.by_type.end() || !it->second.count(g)) {
                v.push_back("by_group has " + g.label() + "/" + type.name() + " but by_type does not");
            }
        }
    }
    std::map<GroupId, std::map<AnomalyType, std::size_t>> tally;
    for (const auto& r : detection.records) ++tally[r.group][r.type];
    if (tally != idx.counts) v.push_back("counts differ from a tally of the records");
    for (const auto& [g, per_type] : idx.counts) {
        const auto it = idx.by_group.find(g);
        std::set<AnomalyType> types;
        for (const auto& [t, n] : per_type) {
            if (n == 0) v.push_back("zero count for " + g.label());
            types.insert(t);
        }
        if (it == idx.by_group.end() || it->second != types) {
            v.push_back("counts and by_group disagree for " + g.label());
        }
    }
    if (idx.counts.size() != idx.by_group.size()) v.push_back("counts and by_group have different groups");
    if (idx.total() != detection.records.size()) v.push_back("total differs from the record count");
    return v;
}

auto edit_distance(const std::u32string& a, const std::u32string& b) -> std::size_t {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
        }
    }
    return d[a.size()][b.size()];
}

auto bin_counts(const std::vector<double>& values, const std::vector<double>& edges) -> std::vector<std::size_t> {
    std::vector<std::size_t> counts(edges.size() < 2 ? 0 : edges.size() - 1, 0);
    for (double v : values) {
        if (counts.empty()) break;
        if (v == edges.back()) {
            ++counts.back();
            continue;
        }
        for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
            if (edges[i] <= v && v < edges[i + 1]) {
                ++counts[i];
                break;
            }
        }
    }
    return counts;
}

// ---------------------------------------------------------------------------
// JSON schema

SchemaValidator::SchemaValidator(Json root) : root_(std::move(root)) {}

auto SchemaValidator::resolve(const Json& schema) const -> const Json& {
    const Json* s = &schema;
    while (s->is_object() && s->contains("$ref")) {
        const auto ref = (*s)["$ref"].get<std::string>();
        const std::string prefix = "#/definitions/";
        if (ref.rfind(prefix, 0) != 0) throw std::runtime_error("unsupported $ref " + ref);
        s = &root_.at("definitions").at(ref.substr(prefix.size()));
    }
    return *s;
}

namespace {

auto type_matches(const Json& doc, const std::string& type) -> bool {
    if (type == "object") return doc.is_object();
    if (type == "array") return doc.is_array();
    if (type == "string") return doc.is_string();
    if (type == "integer") return doc.is_number_integer();
    if (type == "number") return doc.is_number();
    if (type == "boolean") return doc.is_boolean();
    if (type == "null") return doc.is_null();
    throw std::runtime_error("unknown schema type " + type);
}

}  // namespace

void SchemaValidator::check(const Json& doc, const Json& raw, const std::string& path,
                            std::vector<std::string>& errors) const {
    const Json& schema = resolve(raw);
    auto fail = [&](const std::string& what) { errors.push_back(path + ": " + what); };

    if (schema.contains("type")) {
        const auto& t = schema["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(doc, t.get<std::string>());
        } else {
            for (const auto& alt : t) ok = ok || type_matches(doc, alt.get<std::string>());
        }
        if (!ok) {
            fail("expected type " + t.dump() + ", got " + doc.dump().substr(0, 80));
            return;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& e : schema["enum"]) ok = ok || e == doc;
        if (!ok) fail("value " + doc.dump() + " not in enum");
    }
    if (doc.is_number()) {
        const double v = doc.get<double>();
        if (schema.contains("minimum") && v < schema["minimum"].get<double>()) fail("below minimum");
        if (schema.contains("maximum") && v > schema["maximum"].get<double>()) fail("above maximum");
        if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>()) {
            fail("not above exclusiveMinimum");
        }
    }
    if (doc.is_string() && schema.contains("pattern")) {
        if (!std::regex_search(doc.get<std::string>(), std::regex(schema["pattern"].get<std::string>()))) {
            fail("'" + doc.get<std::string>() + "' does not match " + schema["pattern"].get<std::string>());
        }
    }
    if (doc.is_object()) {
        if (schema.contains("required")) {
            for (const auto& r : schema["required"]) {
                if (!doc.contains(r.get<std::string>())) fail("missing required field " + r.get<std::string>());
            }
        }
        const Json props = schema.value("properties", Json::object());
        for (const auto& [key, value] : doc.items()) {
            if (props.contains(key)) {
                check(value, props[key], path + "." + key, errors);
            } else if (schema.contains("additionalProperties")) {
                const auto& ap = schema["additionalProperties"];
                if (ap.is_boolean()) {
                    if (!ap.get<bool>()) fail("unexpected field " + key);
                } else {
                    check(value, ap, path + "." + key, errors);
                }
            }
        }
    }
    if (doc.is_array()) {
        if (schema.contains("minItems") && doc.size() < schema["minItems"].get<std::size_t>()) fail("too few items");
        if (schema.contains("items")) {
            for (std::size_t i = 0; i < doc.size(); ++i) {
                check(doc[i], schema["items"], path + "[" + std::to_string(i) + "]", errors);
            }
        }
    }
    for (const char* combinator : {"oneOf", "anyOf"}) {
        if (!schema.contains(combinator)) continue;
        std::size_t matches = 0;
        for (const auto& alt : schema[combinator]) {
            std::vector<std::string> sub;
            check(doc, alt, path, sub);
            if (sub.empty()) ++matches;
        }
        const bool one = std::string(combinator) == "oneOf";
        if (one ? matches != 1 : matches == 0) {
            fail(std::string(combinator) + " matched " + std::to_string(matches) + " alternatives");
        }
    }
}

auto SchemaValidator::validate(const Json& doc, const std::string& definition) const -> std::vector<std::string> {
    std::vector<std::string> errors;
    check(doc, root_.at("definitions").at(definition), definition, errors);
    return errors;
}

auto api_schema() -> const SchemaValidator& {
    static const SchemaValidator v(
        Json::parse(read_text(std::string(CORRAL_SOURCE_DIR) + "/docs/schemas/api.schema.json")));
    return v;
}

// ---------------------------------------------------------------------------
// Scripts

auto python3_available() -> bool {
    static const bool available = std::system("python3 -c 'import sys' >/dev/null 2>&1") == 0;
    return available;
}

TempDir::TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("corral-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

auto run_script(const std::string& script, const std::string& input_csv, std::string* error)
    -> std::optional<std::string> {
    TempDir dir;
    write_text(dir.file("script.py"), script);
    write_text(dir.file("in.csv"), input_csv);
    const std::string cmd = "python3 '" + dir.file("script.py").string() + "' '" + dir.file("in.csv").string() +
                            "' '" + dir.file("out.csv").string() + "' 2>'" + dir.file("err.txt").string() + "'";
    if (std::system(cmd.c_str()) != 0) {
        if (error) *error = fs::exists(dir.file("err.txt")) ? read_text(dir.file("err.txt")) : "script failed";
        return std::nullopt;
    }
    return read_text(dir.file("out.csv"));
}

auto load_like(const std::string& csv, const Table& like, const CsvOptions& options) -> Table {
    const auto kinds = like.kinds();
    return coerce_kinds(load_csv(csv, options, like.name()), kinds);
}

}  // namespace corral::test
