#pragma once

#include "corral/error.hpp"
#include "corral/json_io.hpp"
#include "corral/session.hpp"

#include <cstddef>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace corral {

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_upload_bytes = 50u << 20;
    /// Origins allowed by CORS; "*" allows any.
    std::vector<std::string> cors_origins;
    std::size_t session_cap = 32;
    std::optional<std::string> embedding_endpoint;
};

/// Reads PORT, MAX_UPLOAD_BYTES, EMBEDDING_ENDPOINT and CORS_ORIGINS
/// (comma-separated) over the defaults. Throws Error(InvalidConfig) on
/// unparsable values.
auto server_config_from_env(ServerConfig base = {}) -> ServerConfig;

/// HTTP status for an engine error: 4xx for client faults, 5xx otherwise.
auto http_status(ErrorCode code) -> int;

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// The JSON API, independent of the transport. Thread-safe: the store is
/// guarded by one lock and each session by its own, so mutations of one
/// session are serialized while other sessions proceed.
class Api {
public:
    explicit Api(ServerConfig config = {});

    auto handle(const ApiRequest& request) -> ApiResponse;

    [[nodiscard]] auto config() const -> const ServerConfig& { return config_; }
    [[nodiscard]] auto live_sessions() const -> std::size_t;

private:
    struct Dataset {
        std::string id;
        std::string name;
        std::string fingerprint;
        CsvOptions csv;
        Table raw;  // untyped, as loaded
    };
    struct Slot {
        std::mutex mutex;
        std::unique_ptr<Session> session;
        std::string dataset_id;
    };
    struct Archived {
        Json exported;
        std::string dataset_id;
    };

    auto upload(const ApiRequest& req) -> Json;
    auto create(const Json& body) -> Json;
    auto session_route(const std::string& id, const std::string& op, const ApiRequest& req) -> ApiResponse;

    auto slot(const std::string& id) -> std::shared_ptr<Slot>;
    auto dataset(const std::string& id) const -> std::shared_ptr<const Dataset>;
    void insert(std::shared_ptr<Slot> s);
    void touch(const std::string& id);

    ServerConfig config_;
    SimilarityFn similarity_;
    mutable std::mutex store_mutex_;
    std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::list<std::string> lru_;  // most recent first
    std::map<std::string, Archived> archived_;
};

/// Serves the API over HTTP until stop() or the process ends.
class HttpServer {
public:
    explicit HttpServer(ServerConfig config);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    auto operator=(const HttpServer&) -> HttpServer& = delete;

    /// Binds the configured port (0 picks a free one). Throws Error(Internal)
    /// when the port cannot be bound.
    void bind();
    [[nodiscard]] auto port() const -> int { return port_; }
    /// Blocks serving requests.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

}  // namespace corral
