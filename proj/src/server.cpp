#include "corral/server.hpp"

#include "corral/codegen.hpp"
#include "corral/embedding.hpp"
#include "corral/hash.hpp"
#include "corral/insight.hpp"
#include "corral/version.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>

namespace corral {

namespace {

auto parse_size(std::string_view text, std::string_view what) -> std::size_t {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be a non-negative integer");
    }
    return v;
}

auto split_list(std::string_view text) -> std::vector<std::string> {
    std::vector<std::string> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        auto item = text.substr(0, comma);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

auto json_response(int status, const Json& body) -> ApiResponse {
    return {status, "application/json", body.dump()};
}

auto error_response(int status, std::string_view code, const std::string& message,
                    const Json& detail = nullptr) -> ApiResponse {
    Json body{{"status", status}, {"code", code}, {"message", message}};
    if (!detail.is_null()) body["detail"] = detail;
    return json_response(status, body);
}

auto error_response(const Error& e) -> ApiResponse {
    Json body = error_json(e);
    const int status = http_status(e.code());
    body["status"] = status;
    return json_response(status, body);
}

auto parse_body(const ApiRequest& req) -> Json {
    if (req.body.empty()) return Json::object();
    try {
        return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::BadRequest, std::string("request body is not valid JSON: ") + e.what());
    }
}

auto query_or(const ApiRequest& req, const std::string& key, std::string fallback) -> std::string {
    const auto it = req.query.find(key);
    return it == req.query.end() ? fallback : it->second;
}

auto require_query(const ApiRequest& req, const std::string& key) -> std::string {
    const auto it = req.query.find(key);
    if (it == req.query.end() || it->second.empty()) {
        throw Error(ErrorCode::BadRequest, "missing query parameter '" + key + "'");
    }
    return it->second;
}

auto ranked_json(const Session& s, std::size_t k) -> Json {
    Json out = Json::array();
    for (const auto& g : rank_groups(s.detection().index, k)) out.push_back(ranked_group_json(g));
    return out;
}

auto specs_json(const std::vector<GroupSpec>& specs) -> Json {
    Json out = Json::array();
    for (const auto& s : specs) out.push_back(spec_json(s));
    return out;
}

auto split_path(std::string_view path) -> std::vector<std::string> {
    std::vector<std::string> parts;
    while (!path.empty()) {
        if (path.front() == '/') {
            path.remove_prefix(1);
            continue;
        }
        const auto slash = path.find('/');
        parts.emplace_back(path.substr(0, slash));
        if (slash == std::string_view::npos) break;
        path.remove_prefix(slash);
    }
    return parts;
}

}  // namespace

auto server_config_from_env(ServerConfig base) -> ServerConfig {
    if (const char* v = std::getenv("PORT"); v && *v) {
        const auto port = parse_size(v, "PORT");
        if (port > 65535) throw Error(ErrorCode::InvalidConfig, "PORT must be at most 65535");
        base.port = static_cast<int>(port);
    }
    if (const char* v = std::getenv("MAX_UPLOAD_BYTES"); v && *v) {
        base.max_upload_bytes = parse_size(v, "MAX_UPLOAD_BYTES");
    }
    if (const char* v = std::getenv("EMBEDDING_ENDPOINT"); v && *v) base.embedding_endpoint = v;
    if (const char* v = std::getenv("CORS_ORIGINS"); v && *v) base.cors_origins = split_list(v);
    return base;
}

auto http_status(ErrorCode code) -> int {
    switch (code) {
        case ErrorCode::MalformedCsv:
        case ErrorCode::EmptyInput:
        case ErrorCode::ColumnNotFound:
        case ErrorCode::KindMismatch:
        case ErrorCode::InvalidSpec:
        case ErrorCode::InvalidConfig:
        case ErrorCode::InvalidAction:
        case ErrorCode::RuleSyntax:
        case ErrorCode::RuleType:
        case ErrorCode::UnsupportedKind:
        case ErrorCode::BadRequest:
            return 400;
        case ErrorCode::DatasetNotFound:
        case ErrorCode::SessionNotFound:
            return 404;
        case ErrorCode::StaleGroup:
        case ErrorCode::StaleRecord:
        case ErrorCode::StaleAction:
        case ErrorCode::NothingToUndo:
        case ErrorCode::NothingToRedo:
            return 409;
        case ErrorCode::PayloadTooLarge:
            return 413;
        case ErrorCode::NoCategoricalColumns:
        case ErrorCode::NoNumericColumns:
        case ErrorCode::EmptyMeanBasis:
        case ErrorCode::NotConvertible:
        case ErrorCode::NoSuggestion:
        case ErrorCode::UnsupportedAction:
            return 422;
        case ErrorCode::Internal:
            return 500;
    }
    return 500;
}

Api::Api(ServerConfig config) : config_(std::move(config)) {
    if (config_.session_cap < 1) throw Error(ErrorCode::InvalidConfig, "session cap must be >= 1");
    if (config_.embedding_endpoint) {
        similarity_ = embedding_similarity(std::make_shared<EmbeddingClient>(*config_.embedding_endpoint));
    }
}

auto Api::live_sessions() const -> std::size_t {
    std::lock_guard lock(store_mutex_);
    return sessions_.size();
}

auto Api::handle(const ApiRequest& req) -> ApiResponse {
    try {
        const auto parts = split_path(req.path);
        if (parts.empty() || parts[0] != "api") {
            return error_response(404, "NOT_FOUND", "no route for " + req.path);
        }
        if (parts.size() == 2 && parts[1] == "health") {
            if (req.method != "GET") return error_response(405, "METHOD_NOT_ALLOWED", "use GET");
            return json_response(200, {{"status", "ok"}, {"version", kEngineVersion}});
        }
        if (parts.size() == 2 && parts[1] == "datasets") {
            if (req.method != "POST") return error_response(405, "METHOD_NOT_ALLOWED", "use POST");
            return json_response(201, upload(req));
        }
        if (parts.size() == 2 && parts[1] == "sessions") {
            if (req.method != "POST") return error_response(405, "METHOD_NOT_ALLOWED", "use POST");
            return json_response(201, create(parse_body(req)));
        }
        if (parts.size() >= 3 && parts.size() <= 4 && parts[1] == "sessions") {
            return session_route(parts[2], parts.size() == 4 ? parts[3] : "", req);
        }
        return error_response(404, "NOT_FOUND", "no route for " + req.path);
    } catch (const Error& e) {
        return error_response(e);
    } catch (const std::exception& e) {
        spdlog::error("internal error on {} {}: {}", req.method, req.path, e.what());
        return error_response(500, "INTERNAL", e.what());
    }
}

auto Api::upload(const ApiRequest& req) -> Json {
    if (req.body.size() > config_.max_upload_bytes) {
        throw Error(ErrorCode::PayloadTooLarge, "upload of " + std::to_string(req.body.size()) +
                                                    " bytes exceeds the limit of " +
                                                    std::to_string(config_.max_upload_bytes));
    }
    auto ds = std::make_shared<Dataset>();
    ds->name = query_or(req, "name", "upload.csv");
    const auto delimiter = query_or(req, "delimiter", ",");
    if (delimiter.size() != 1) throw Error(ErrorCode::BadRequest, "delimiter must be one character");
    ds->csv.delimiter = delimiter[0];
    const auto header = query_or(req, "has_header", "true");
    if (header != "true" && header != "false") throw Error(ErrorCode::BadRequest, "has_header must be true or false");
    ds->csv.has_header = header == "true";
    ds->raw = load_csv(req.body, ds->csv, ds->name);
    ds->fingerprint = sha256_hex(req.body);
    ds->id = new_session_id();

    const Table typed = infer_kinds(ds->raw);
    Json out{{"dataset_id", ds->id},
             {"name", ds->name},
             {"fingerprint", ds->fingerprint},
             {"row_count", typed.row_count()},
             {"schema", table_schema_json(typed)}};
    std::lock_guard lock(store_mutex_);
    datasets_[ds->id] = std::move(ds);
    return out;
}

auto Api::dataset(const std::string& id) const -> std::shared_ptr<const Dataset> {
    std::lock_guard lock(store_mutex_);
    const auto it = datasets_.find(id);
    if (it == datasets_.end()) throw Error(ErrorCode::DatasetNotFound, "dataset '" + id + "' not found");
    return it->second;
}

auto Api::create(const Json& body) -> Json {
    if (!body.is_object()) throw Error(ErrorCode::BadRequest, "body: expected an object");
    for (const auto& [key, value] : body.items()) {
        if (key != "dataset_id" && key != "config" && key != "specs" && key != "targets" && key != "min_support") {
            throw Error(ErrorCode::BadRequest, "body: unexpected field '" + key + "'");
        }
    }
    if (!body.contains("dataset_id") || !body["dataset_id"].is_string()) {
        throw Error(ErrorCode::BadRequest, "body.dataset_id: expected a string");
    }
    const auto ds = dataset(body["dataset_id"].get<std::string>());
    const auto config = config_from_json(body.value("config", Json(nullptr)), "body.config");
    Table table = infer_kinds(ds->raw, config.numeric_majority);

    std::vector<GroupSpec> specs;
    if (body.contains("specs")) {
        const auto& list = body["specs"];
        if (!list.is_array()) throw Error(ErrorCode::BadRequest, "body.specs: expected an array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            specs.push_back(spec_from_json(list[i], "body.specs[" + std::to_string(i) + "]"));
        }
    } else {
        std::optional<std::vector<std::string>> targets;
        if (body.contains("targets")) {
            if (!body["targets"].is_array()) throw Error(ErrorCode::BadRequest, "body.targets: expected an array");
            targets.emplace();
            for (const auto& t : body["targets"]) {
                if (!t.is_string()) throw Error(ErrorCode::BadRequest, "body.targets: expected strings");
                targets->push_back(t.get<std::string>());
            }
        }
        std::size_t min_support = 1;
        if (body.contains("min_support")) {
            if (!body["min_support"].is_number_unsigned()) {
                throw Error(ErrorCode::BadRequest, "body.min_support: expected a non-negative integer");
            }
            min_support = body["min_support"].get<std::size_t>();
        }
        specs = enumerate_all_specs(table, targets, min_support);
    }

    SessionOptions options;
    options.similarity = similarity_;
    auto s = std::make_shared<Slot>();
    s->dataset_id = ds->id;
    s->session = std::make_unique<Session>(new_session_id(), std::move(table), config, std::move(specs),
                                           SourceInfo{ds->name, ds->fingerprint, ds->csv}, options);
    const Session& session = *s->session;
    Json out{{"session_id", session.id()},
             {"dataset_id", ds->id},
             {"version", session.version()},
             {"schema", table_schema_json(session.table())},
             {"specs", specs_json(session.specs())},
             {"config", config_json(session.config())},
             {"anomaly_summary", anomaly_summary_json(session.detection())},
             {"top_groups", ranked_json(session, session.config().top_k)}};
    insert(std::move(s));
    return out;
}

void Api::insert(std::shared_ptr<Slot> s) {
    std::lock_guard lock(store_mutex_);
    const std::string id = s->session->id();
    sessions_[id] = std::move(s);
    lru_.remove(id);
    lru_.push_front(id);
    while (sessions_.size() > config_.session_cap) {
        const std::string victim = lru_.back();
        lru_.pop_back();
        auto it = sessions_.find(victim);
        if (it == sessions_.end()) continue;
        auto slot = it->second;
        std::lock_guard slot_lock(slot->mutex);
        archived_[victim] = Archived{session_export_json(*slot->session), slot->dataset_id};
        slot->session.reset();
        sessions_.erase(it);
        spdlog::info("session {} evicted; it will be replayed from its export on next use", victim);
    }
}

void Api::touch(const std::string& id) {
    lru_.remove(id);
    lru_.push_front(id);
}

auto Api::slot(const std::string& id) -> std::shared_ptr<Slot> {
    Archived archived;
    {
        std::lock_guard lock(store_mutex_);
        if (auto it = sessions_.find(id); it != sessions_.end()) {
            touch(id);
            return it->second;
        }
        auto it = archived_.find(id);
        if (it == archived_.end()) throw Error(ErrorCode::SessionNotFound, "session '" + id + "' not found");
        archived = it->second;
        archived_.erase(it);
    }
    // Replay outside the store lock; the export holds everything needed.
    const auto ds = dataset(archived.dataset_id);
    const auto& ex = archived.exported;
    const auto config = config_from_json(ex.at("config"), "export.config");
    std::vector<GroupSpec> specs;
    for (const auto& j : ex.at("specs")) specs.push_back(spec_from_json(j, "export.specs"));
    const auto actions = recipe_from_json(ex);
    SessionOptions options;
    options.similarity = similarity_;
    auto s = std::make_shared<Slot>();
    s->dataset_id = archived.dataset_id;
    s->session = std::make_unique<Session>(id, infer_kinds(ds->raw, config.numeric_majority), config,
                                           std::move(specs), SourceInfo{ds->name, ds->fingerprint, ds->csv},
                                           options);
    for (const auto& a : actions) s->session->commit(a);
    insert(s);
    return s;
}

auto Api::session_route(const std::string& id, const std::string& op, const ApiRequest& req) -> ApiResponse {
    const bool get = req.method == "GET";
    const bool post = req.method == "POST";
    static const std::vector<std::string> kGet = {"", "anomalies", "summary", "chart", "script", "table", "export"};
    static const std::vector<std::string> kPost = {"preview", "actions", "undo", "redo", "suggestions"};
    const bool is_get_route = std::find(kGet.begin(), kGet.end(), op) != kGet.end();
    const bool is_post_route = std::find(kPost.begin(), kPost.end(), op) != kPost.end();
    if (!is_get_route && !is_post_route) return error_response(404, "NOT_FOUND", "no route for " + req.path);
    if ((is_get_route && !get) || (is_post_route && !post)) {
        return error_response(405, "METHOD_NOT_ALLOWED", std::string("use ") + (is_get_route ? "GET" : "POST"));
    }
    const Json body = post ? parse_body(req) : Json::object();

    while (true) {
        auto s = slot(id);
        std::lock_guard lock(s->mutex);
        if (!s->session) continue;  // evicted while we waited; replay it
        Session& session = *s->session;

        if (op.empty()) {
            return json_response(200, {{"session_id", session.id()},
                                       {"dataset_id", s->dataset_id},
                                       {"version", session.version()},
                                       {"undo_depth", session.undo_stack().size()},
                                       {"redo_depth", session.redo_stack().size()},
                                       {"schema", table_schema_json(session.table())},
                                       {"specs", specs_json(session.specs())},
                                       {"anomaly_summary", anomaly_summary_json(session.detection())}});
        }
        if (op == "anomalies") {
            std::size_t k = session.config().top_k;
            if (auto it = req.query.find("top_k"); it != req.query.end()) {
                try {
                    k = parse_size(it->second, "top_k");
                } catch (const Error&) {
                    throw Error(ErrorCode::BadRequest, "top_k must be a positive integer");
                }
                if (k < 1) throw Error(ErrorCode::BadRequest, "top_k must be a positive integer");
            }
            return json_response(200, anomalies_report_json(session, k));
        }
        if (op == "summary") return json_response(200, summary_report_json(session));
        if (op == "chart") {
            GroupSpec spec{require_query(req, "group_by"), require_query(req, "target"), 1};
            for (const auto& sp : session.specs()) {
                if (sp.group_by == spec.group_by && sp.target == spec.target) spec = sp;
            }
            const auto kind = parse_chart_kind(query_or(req, "kind", "stacked_histogram"));
            const auto mode = parse_color_mode(query_or(req, "mode", "group_name"));
            return json_response(200, chart_payload_json(chart_payload(session.table(), spec, kind, mode,
                                                                       session.detection().records)));
        }
        if (op == "script") {
            const auto art = generate_script(session);
            return json_response(200, {{"language_tag", art.language_tag},
                                       {"input_ref", art.input_ref},
                                       {"action_count", art.action_count},
                                       {"verifiable", art.verifiable},
                                       {"warnings", art.warnings},
                                       {"source_text", art.source_text}});
        }
        if (op == "table") {
            const auto format = query_or(req, "format", "csv");
            if (format != "csv") throw Error(ErrorCode::BadRequest, "unsupported table format '" + format + "'");
            return {200, "text/csv; charset=utf-8", serialize_csv(session.table(), session.source().csv)};
        }
        if (op == "export") return json_response(200, session_export_json(session));

        auto action_of = [&]() {
            if (!body.is_object() || !body.contains("action")) {
                throw Error(ErrorCode::BadRequest, "body: missing field 'action'");
            }
            return action_from_json(body["action"], "body.action");
        };
        if (op == "preview") {
            const auto diff = session.preview(action_of());
            return json_response(200, {{"version", session.version()}, {"diff", diff_json(diff)}});
        }
        if (op == "actions") {
            const auto diff = session.commit(action_of());
            return json_response(200, {{"version", session.version()},
                                       {"diff", diff_json(diff)},
                                       {"anomaly_delta", anomaly_delta_json(diff.anomaly_delta)},
                                       {"anomaly_summary", anomaly_summary_json(session.detection())}});
        }
        if (op == "undo" || op == "redo") {
            const auto delta = op == "undo" ? session.undo() : session.redo();
            return json_response(200, {{"version", session.version()},
                                       {"anomaly_delta", anomaly_delta_json(delta)},
                                       {"anomaly_summary", anomaly_summary_json(session.detection())}});
        }
        // suggestions
        if (!body.is_object() || !body.contains("record_index") || !body["record_index"].is_number_unsigned()) {
            throw Error(ErrorCode::BadRequest, "body.record_index: expected a non-negative integer");
        }
        if (body.contains("version")) {
            if (!body["version"].is_number_unsigned()) throw Error(ErrorCode::BadRequest, "body.version: expected an integer");
            if (body["version"].get<std::uint64_t>() != session.version()) {
                throw Error(ErrorCode::StaleRecord, "record index refers to version " +
                                                        std::to_string(body["version"].get<std::uint64_t>()) +
                                                        ", session is at " + std::to_string(session.version()));
            }
        }
        const auto index = body["record_index"].get<std::size_t>();
        const auto& recs = session.detection().records;
        if (index >= recs.size()) throw Error(ErrorCode::StaleRecord, "record index out of range");
        Json suggestions = Json::array();
        for (const auto& action : session.suggest(recs[index])) {
            Json entry{{"action", action_json(action)}, {"description", describe_action(action)}};
            try {
                entry["diff"] = diff_json(session.preview(action));
            } catch (const Error& e) {
                entry["diff"] = nullptr;
                entry["error"] = error_json(e);
            }
            suggestions.push_back(std::move(entry));
        }
        return json_response(200, {{"version", session.version()},
                                   {"record", record_json(recs[index])},
                                   {"suggestions", suggestions}});
    }
}

struct HttpServer::Impl {
    explicit Impl(ServerConfig config) : api(std::move(config)) {}
    Api api;
    httplib::Server server;
};

HttpServer::HttpServer(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
    auto& svr = impl_->server;
    auto* api = &impl_->api;
    svr.set_payload_max_length(api->config().max_upload_bytes);
    // The library default adds SO_REUSEPORT, which lets a second server share a busy port.
    svr.set_socket_options([](auto sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    auto dispatch = [api](const httplib::Request& req, httplib::Response& res) {
        ApiRequest r{req.method, req.path, {}, req.body};
        for (const auto& [k, v] : req.params) r.query.emplace(k, v);
        auto out = api->handle(r);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    svr.Get(R"(/api/.*)", dispatch);
    svr.Post(R"(/api/.*)", dispatch);
    svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.status = 204;
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    svr.set_post_routing_handler([api](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        if (origin.empty()) return;
        const auto& allowed = api->config().cors_origins;
        if (std::find(allowed.begin(), allowed.end(), "*") != allowed.end() ||
            std::find(allowed.begin(), allowed.end(), origin) != allowed.end()) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Vary", "Origin");
        }
    });
    svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        ApiResponse out;
        if (res.status == 413) {
            out = error_response(Error(ErrorCode::PayloadTooLarge, "request body exceeds the upload limit"));
        } else {
            out = error_response(res.status, res.status == 404 ? "NOT_FOUND" : "HTTP_ERROR",
                                 "request to " + req.path + " failed with HTTP " + std::to_string(res.status));
        }
        res.set_content(out.body, out.content_type);
    });
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::bind() {
    const auto& cfg = impl_->api.config();
    if (cfg.port == 0) {
        port_ = impl_->server.bind_to_any_port(cfg.host);
        if (port_ < 0) throw Error(ErrorCode::Internal, "cannot bind any port on " + cfg.host);
    } else {
        if (!impl_->server.bind_to_port(cfg.host, cfg.port)) {
            throw Error(ErrorCode::Internal, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port) +
                                                 " (port already in use or not permitted)");
        }
        port_ = cfg.port;
    }
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace corral
