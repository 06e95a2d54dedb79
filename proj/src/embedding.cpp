#include "corral/embedding.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>

namespace corral {

auto cosine_similarity_01(const std::vector<double>& a, const std::vector<double>& b) -> double {
    if (a.size() != b.size() || a.empty()) return 0.5;
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.5;
    const double cos = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    return (1.0 + cos) / 2.0;
}

EmbeddingClient::EmbeddingClient(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
    const auto scheme_end = endpoint_.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = endpoint_.find('/', host_start);
    origin_ = endpoint_.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);
}

auto EmbeddingClient::fetch(const std::vector<std::string>& keys) const
    -> std::optional<std::map<std::string, std::vector<double>>> {
    try {
        httplib::Client client(origin_);
        if (!client.is_valid()) {
            spdlog::warn("embedding endpoint '{}' is not a usable http URL", endpoint_);
            return std::nullopt;
        }
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        const nlohmann::json request{{"inputs", keys}};
        auto res = client.Post(path_, request.dump(), "application/json");
        if (!res) {
            spdlog::warn("embedding request to '{}' failed: {}", endpoint_, httplib::to_string(res.error()));
            return std::nullopt;
        }
        if (res->status != 200) {
            spdlog::warn("embedding request to '{}' returned HTTP {}", endpoint_, res->status);
            return std::nullopt;
        }
        const auto body = nlohmann::json::parse(res->body);
        const auto& vectors = body.at("embeddings");
        if (!vectors.is_array() || vectors.size() != keys.size()) {
            spdlog::warn("embedding reply from '{}' has the wrong shape", endpoint_);
            return std::nullopt;
        }
        std::map<std::string, std::vector<double>> out;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            out[keys[i]] = vectors[i].get<std::vector<double>>();
        }
        return out;
    } catch (const std::exception& e) {
        spdlog::warn("embedding reply from '{}' could not be read: {}", endpoint_, e.what());
        return std::nullopt;
    }
}

auto embedding_similarity(std::shared_ptr<const EmbeddingClient> client) -> SimilarityFn {
    struct Cache {
        std::mutex mutex;
        std::map<std::string, std::vector<double>> vectors;
    };
    auto cache = std::make_shared<Cache>();
    return [client = std::move(client), cache](std::string_view a, std::string_view b) -> double {
        if (a == b) return 1.0;
        std::vector<std::string> wanted;
        {
            std::lock_guard lock(cache->mutex);
            for (auto key : {std::string(a), std::string(b)}) {
                if (!cache->vectors.count(key)) wanted.push_back(std::move(key));
            }
        }
        if (!wanted.empty()) {
            auto fetched = client->fetch(wanted);
            if (!fetched) return key_similarity(a, b);
            std::lock_guard lock(cache->mutex);
            for (auto& [k, v] : *fetched) cache->vectors[k] = std::move(v);
        }
        std::lock_guard lock(cache->mutex);
        return cosine_similarity_01(cache->vectors.at(std::string(a)), cache->vectors.at(std::string(b)));
    };
}

}  // namespace corral
