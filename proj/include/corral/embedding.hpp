#pragma once

#include "corral/repair.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace corral {

/// (1 + cos) / 2 of two vectors; 0.5 when either has zero norm or the
/// dimensions differ.
auto cosine_similarity_01(const std::vector<double>& a, const std::vector<double>& b) -> double;

/// Client for an embedding service. Protocol: POST {"inputs": [keys...]} to
/// the endpoint; the reply is {"embeddings": [[...], ...]} in input order.
class EmbeddingClient {
public:
    /// `endpoint` is an http(s) URL such as "http://localhost:9000/embed".
    explicit EmbeddingClient(std::string endpoint,
                             std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

    /// Vectors for `keys`, or nullopt on any network or protocol failure.
    auto fetch(const std::vector<std::string>& keys) const
        -> std::optional<std::map<std::string, std::vector<double>>>;

    [[nodiscard]] auto endpoint() const -> const std::string& { return endpoint_; }

private:
    std::string endpoint_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;
    std::chrono::milliseconds timeout_;
};

/// Similarity backed by the client with a per-key vector cache. Any failure
/// logs a warning and falls back to key_similarity for that pair.
auto embedding_similarity(std::shared_ptr<const EmbeddingClient> client) -> SimilarityFn;

}  // namespace corral
