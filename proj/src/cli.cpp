#include "corral/cli.hpp"

#include "corral/codegen.hpp"
#include "corral/error.hpp"
#include "corral/hash.hpp"
#include "corral/insight.hpp"
#include "corral/json_io.hpp"
#include "corral/server.hpp"
#include "corral/session.hpp"
#include "corral/version.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace corral {

namespace {

namespace fs = std::filesystem;

auto read_file(const std::string& path) -> std::string {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::BadRequest, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes via a sibling temp file and rename so readers never see a partial file.
void write_file_atomic(const std::string& path, std::string_view bytes) {
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp-" + new_session_id().substr(0, 8);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::BadRequest, "cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(ErrorCode::BadRequest, "cannot write '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::BadRequest, "cannot move output into '" + path + "'");
    }
}

auto percent(double f) -> std::string {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << f * 100.0 << "%";
    return os.str();
}

auto markdown_report(const Session& session, std::size_t top_k) -> std::string {
    const auto& records = session.detection().records;
    if (records.empty()) return {};
    std::ostringstream md;
    const auto& t = session.table();
    md << "# Anomaly report: " << session.source().name << "\n\n";
    md << t.row_count() << " rows, " << t.column_count() << " columns, " << session.specs().size()
       << " group specs, " << records.size() << " anomalies.\n\n";

    md << "## Top groups\n\n";
    md << "| Rank | Group | Anomalies | Dominant type | Breakdown |\n";
    md << "|---:|---|---:|---|---|\n";
    std::size_t rank = 0;
    for (const auto& g : rank_groups(session.detection().index, top_k)) {
        std::string breakdown;
        for (const auto& [type, n] : g.per_type) {
            if (!breakdown.empty()) breakdown += ", ";
            breakdown += type.name() + " " + std::to_string(n);
        }
        md << "| " << ++rank << " | " << g.group.label() << " | " << g.total_anomalies << " | "
           << g.dominant_type.name() << " | " << breakdown << " |\n";
    }

    md << "\n## Attributes\n\n";
    md << "| Column | Anomalies | Types |\n";
    md << "|---|---:|---|\n";
    for (const auto& a : attribute_summary(t, records)) {
        std::string types;
        for (const auto& [type, n] : a.per_type_counts) {
            if (!types.empty()) types += ", ";
            types += type.name() + " " + std::to_string(n) + " (" + percent(a.per_type_frequency.at(type)) + ")";
        }
        md << "| " << a.column << " | " << static_cast<std::size_t>(a.score) << " | " << types << " |\n";
    }
    return md.str();
}

struct DetectArgs {
    std::string input;
    std::vector<std::string> targets;
    std::size_t min_support = 1;
    std::size_t top_k = 3;
    std::vector<std::string> rules;
    std::string report;
    std::string format = "md";
    double sigma = 2.0;
    std::size_t incomplete_threshold = 2;
    double numeric_majority = 0.5;
};

auto cmd_detect(const DetectArgs& a, std::ostream& out) -> int {
    const std::string bytes = read_file(a.input);
    DetectorConfig config;
    config.outlier_sigma = a.sigma;
    config.incomplete_threshold = a.incomplete_threshold;
    config.numeric_majority = a.numeric_majority;
    config.top_k = a.top_k;
    for (const auto& r : a.rules) {
        const auto eq = r.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw Error(ErrorCode::InvalidConfig, "--rule expects id=expression, got '" + r + "'");
        }
        config.custom_rules.push_back({r.substr(0, eq), r.substr(eq + 1)});
    }
    validate_config(config);

    SourceInfo source{fs::path(a.input).filename().string(), sha256_hex(bytes), {}};
    Table table = infer_kinds(load_csv(bytes, source.csv, source.name), config.numeric_majority);
    std::optional<std::vector<std::string>> targets;
    if (!a.targets.empty()) targets = a.targets;
    auto specs = enumerate_all_specs(table, targets, a.min_support);
    const Session session = create_session(std::move(table), config, std::move(specs), source);

    std::string body;
    if (a.format == "json") {
        Json report{{"input", source.name},
                    {"fingerprint", source.fingerprint},
                    {"engine_version", kEngineVersion},
                    {"config", config_json(config)},
                    {"anomaly_summary", anomaly_summary_json(session.detection())},
                    {"anomalies", anomalies_report_json(session, a.top_k)},
                    {"summary", summary_report_json(session)}};
        body = report.dump(2) + "\n";
    } else {
        body = markdown_report(session, a.top_k);
    }
    if (a.report.empty() || a.report == "-") {
        out << body;
    } else {
        write_file_atomic(a.report, body);
    }
    return session.detection().records.empty() ? kExitClean : kExitAnomalies;
}

struct ApplyArgs {
    std::string input;
    std::string recipe;
    std::string out;
    std::string emit_script;
};

auto cmd_apply(const ApplyArgs& a, std::ostream& err) -> int {
    const std::string bytes = read_file(a.input);
    const std::string recipe_text = read_file(a.recipe);
    std::vector<RepairAction> actions;
    try {
        actions = recipe_from_json(Json::parse(recipe_text));
    } catch (const Json::parse_error& e) {
        err << "corral: recipe is not valid JSON: " << e.what() << "\n";
        return kExitSchema;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::BadRequest) throw;
        err << "corral: recipe does not match the schema: " << e.what() << "\n";
        return kExitSchema;
    }

    SourceInfo source{fs::path(a.input).filename().string(), sha256_hex(bytes), {}};
    const Table original = infer_kinds(load_csv(bytes, source.csv, source.name));
    Table table = original;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        try {
            table = apply_action(table, actions[i]).table;
        } catch (const Error& e) {
            err << "corral: action " << i << " (" << action_tag(actions[i]) << ") failed: "
                << error_code_name(e.code()) << ": " << e.what() << "\n";
            return kExitError;
        }
    }

    std::optional<ScriptArtifact> script;
    if (!a.emit_script.empty()) script = generate_script(original, actions, source);

    // An empty recipe reproduces the input byte for byte.
    write_file_atomic(a.out, actions.empty() ? std::string_view(bytes) : serialize_csv(table, source.csv));
    if (script) {
        write_file_atomic(a.emit_script, script->source_text);
        for (const auto& w : script->warnings) err << "corral: warning: " << w << "\n";
    }
    return kExitClean;
}

}  // namespace

auto run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) -> int {
    CLI::App app{"corral: subgroup anomaly detection and repair for tabular data", "corral"};
    app.set_version_flag("--version", kEngineVersion);
    app.require_subcommand(1);

    DetectArgs detect;
    auto* d = app.add_subcommand("detect", "Report anomalous groups; exit 0 when clean, 2 when anomalies are found");
    d->add_option("input", detect.input, "Input CSV file")->required();
    d->add_option("--target", detect.targets, "Numeric target column (repeatable; default: all numeric)");
    d->add_option("--min-support", detect.min_support, "Minimum rows per group")->check(CLI::PositiveNumber);
    d->add_option("--top-k", detect.top_k, "Number of top groups to report")->check(CLI::PositiveNumber);
    d->add_option("--rule", detect.rules, "Custom detector as id=expression (repeatable)");
    d->add_option("--sigma", detect.sigma, "Outlier band in population standard deviations");
    d->add_option("--incomplete-threshold", detect.incomplete_threshold, "Groups smaller than this are incomplete");
    d->add_option("--numeric-majority", detect.numeric_majority, "Fraction of numeric cells that makes a column numeric");
    d->add_option("--report", detect.report, "Report file (default: stdout)");
    d->add_option("--format", detect.format, "Report format")->check(CLI::IsMember({"json", "md"}));

    ApplyArgs apply;
    auto* ap = app.add_subcommand("apply", "Apply a JSON recipe of repair actions to a CSV file");
    ap->add_option("input", apply.input, "Input CSV file")->required();
    ap->add_option("--recipe", apply.recipe, "Recipe JSON file")->required();
    ap->add_option("--out", apply.out, "Output CSV file")->required();
    ap->add_option("--emit-script", apply.emit_script, "Also write a Python script reproducing the output");

    ServerConfig serve;
    int port = -1;
    std::size_t max_upload = 0;
    std::vector<std::string> cors;
    auto* sv = app.add_subcommand("serve", "Run the HTTP JSON API");
    sv->add_option("--port", port, "TCP port (default: $PORT or 8080)")->check(CLI::Range(0, 65535));
    sv->add_option("--host", serve.host, "Interface to bind");
    sv->add_option("--max-upload", max_upload, "Upload limit in bytes (default: $MAX_UPLOAD_BYTES or 50 MiB)");
    sv->add_option("--cors-origin", cors, "Allowed CORS origin (repeatable; '*' allows any)");
    sv->add_option("--session-cap", serve.session_cap, "Sessions kept in memory")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);  // --help, --version
        err << "corral: " << e.what() << "\n" << "Run 'corral --help' for usage.\n";
        return kExitUsage;
    }

    try {
        if (d->parsed()) return cmd_detect(detect, out);
        if (ap->parsed()) return cmd_apply(apply, err);
        if (sv->parsed()) {
            serve = server_config_from_env(serve);
            if (port >= 0) serve.port = port;
            if (max_upload > 0) serve.max_upload_bytes = max_upload;
            if (!cors.empty()) serve.cors_origins = cors;
            HttpServer server(serve);
            server.bind();
            err << "corral: serving on http://" << serve.host << ":" << server.port() << "/api\n";
            server.listen();
            return kExitClean;
        }
    } catch (const Error& e) {
        err << "corral: " << error_code_name(e.code()) << ": " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        err << "corral: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}

}  // namespace corral
