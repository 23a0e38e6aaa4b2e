#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kgqa/error.hpp"
#include "kgqa/pipeline.hpp"
#include "kgqa/query_graph.hpp"
#include "kgqa/reasoner.hpp"

namespace httplib {
class Server;
}

namespace kgqa::service {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr int kMaxGraphDepth = 2;
inline constexpr std::size_t kMaxGraphEdges = 200;

struct QueryOverrides {
    std::optional<double> at;
    std::optional<double> df;
    std::optional<int> st;
    std::optional<reasoner::CombineMode> combine;
    std::optional<std::uint64_t> seed;
};

/// Exactly one of `text` and `annotated` (a CoNLL-U document).
struct QueryRequest {
    std::optional<std::string> text;
    std::optional<std::string> annotated;
    QueryOverrides overrides;
};

/// Throws ValidationError for unknown fields, wrong types, or not exactly one input.
QueryRequest parse_query_request(const json& body);
json to_json(const QueryRequest& req);

reasoner::SolveOptions apply_overrides(const QueryOverrides& o, reasoner::SolveOptions base = {});

struct RankedAnswer {
    std::string entity;
    double confidence = 0.0;
    int rank = 0;

    friend bool operator==(const RankedAnswer&, const RankedAnswer&) = default;
};

struct QueryResponse {
    int schema_version = kSchemaVersion;
    std::vector<RankedAnswer> answers;
    /// Same records as qg::serialize.
    json query_graph = json::array();
    std::vector<reasoner::SubgraphNode> nodes;
    std::vector<reasoner::SubgraphEdge> edges;
    std::map<std::string, double> timing_ms;
};

QueryResponse make_response(const pipeline::QueryOutcome& outcome);
json to_json(const QueryResponse& r);
/// Throws FormatError on a schema mismatch.
QueryResponse response_from_json(const json& j);

/// `{"error": {"code", "message", ...}}`; link failures add `phrase`, unsupported
/// queries add `chunks`, unknown ids add `id`.
json error_payload(const Error& e);
int http_status(ErrorCode code) noexcept;

struct GraphFragment {
    std::string center;
    int depth = 1;
    std::vector<std::string> nodes;
    std::vector<kg::RelationEdge> edges;
    bool truncated = false;
};

/// Breadth-first neighbourhood (both edge directions) up to `depth` hops, at most
/// `max_edges` edges. Throws NotFoundError for unknown ids, ValidationError for a bad depth.
GraphFragment graph_neighbors(const kg::KnowledgeGraph& kg, std::string_view id, int depth,
                              std::size_t max_edges = kMaxGraphEdges);
json to_json(const GraphFragment& g);

struct Reply {
    int status = 200;
    std::string body;
};

struct ServiceConfig {
    std::optional<std::string> annotator_url;
    reasoner::SolveOptions defaults;
};

/// Request handlers over a shared, read-only engine.
class Service {
public:
    Service(const pipeline::Engine& engine, ServiceConfig config) : engine_(engine), config_(std::move(config)) {}

    Reply query(std::string_view body) const;
    Reply graph(std::string_view id, std::optional<std::string_view> depth) const;
    Reply health() const;

private:
    const pipeline::Engine& engine_;
    ServiceConfig config_;
};

/// Registers /api/query, /api/graph/{id}, /api/health and CORS handling.
void mount(httplib::Server& server, const Service& service, std::string allowed_origin = "*");

/// KGQA_PORT when set, otherwise `fallback`.
int port_from_env(int fallback);

} // namespace kgqa::service
