#include "kgqa/service.hpp"

#include <charconv>
#include <cstdlib>
#include <deque>
#include <set>

#include <spdlog/spdlog.h>

#include "kgqa/annotation.hpp"

// after Eigen (via the headers above): resolv.h defines a `_res` macro
#include <httplib.h>

namespace kgqa::service {

namespace {

const std::set<std::string> kRequestFields{"text", "annotated", "overrides"};
const std::set<std::string> kOverrideFields{"at", "df", "st", "combine", "seed"};

template <typename T>
T field(const json& obj, const char* key) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("field '") + key + "' has the wrong type");
    }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const char* where) {
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ValidationError(std::string("unknown field '") + k + "' in " + where);
}

json dump_error(ErrorCode code, const std::string& message) {
    return json{{"error", {{"code", error_code_name(code)}, {"message", message}}}};
}

Reply reply(int status, const json& body) { return Reply{status, body.dump()}; }

} // namespace

QueryRequest parse_query_request(const json& body) {
    if (!body.is_object()) throw ValidationError("request body must be an object");
    reject_unknown(body, kRequestFields, "request");
    QueryRequest r;
    if (body.contains("text")) r.text = field<std::string>(body, "text");
    if (body.contains("annotated")) r.annotated = field<std::string>(body, "annotated");
    if (r.text.has_value() == r.annotated.has_value())
        throw ValidationError("exactly one of 'text' and 'annotated' is required");
    if (body.contains("overrides")) {
        const auto& o = body.at("overrides");
        if (!o.is_object()) throw ValidationError("'overrides' must be an object");
        reject_unknown(o, kOverrideFields, "overrides");
        if (o.contains("at")) r.overrides.at = field<double>(o, "at");
        if (o.contains("df")) r.overrides.df = field<double>(o, "df");
        if (o.contains("st")) r.overrides.st = field<int>(o, "st");
        if (o.contains("combine")) r.overrides.combine = reasoner::parse_combine_mode(field<std::string>(o, "combine"));
        if (o.contains("seed")) r.overrides.seed = field<std::uint64_t>(o, "seed");
    }
    return r;
}

json to_json(const QueryRequest& req) {
    json j = json::object();
    if (req.text) j["text"] = *req.text;
    if (req.annotated) j["annotated"] = *req.annotated;
    json o = json::object();
    if (req.overrides.at) o["at"] = *req.overrides.at;
    if (req.overrides.df) o["df"] = *req.overrides.df;
    if (req.overrides.st) o["st"] = *req.overrides.st;
    if (req.overrides.combine) o["combine"] = reasoner::combine_mode_name(*req.overrides.combine);
    if (req.overrides.seed) o["seed"] = *req.overrides.seed;
    if (!o.empty()) j["overrides"] = o;
    return j;
}

reasoner::SolveOptions apply_overrides(const QueryOverrides& o, reasoner::SolveOptions base) {
    if (o.at) base.activation.active_threshold = *o.at;
    if (o.df) base.activation.decay_factor = *o.df;
    if (o.st) base.activation.max_iterations = *o.st;
    if (o.combine) base.combine = *o.combine;
    if (o.seed) base.seed = *o.seed;
    base.activation.validate();
    return base;
}

QueryResponse make_response(const pipeline::QueryOutcome& outcome) {
    QueryResponse r;
    int rank = 1;
    for (const auto& a : outcome.result.answers) r.answers.push_back({a.entity, a.confidence, rank++});
    r.query_graph = json::parse(qg::serialize(outcome.graph));
    r.nodes = outcome.result.explanation.nodes;
    r.edges = outcome.result.explanation.edges;
    r.timing_ms = outcome.timing_ms;
    return r;
}

json to_json(const QueryResponse& r) {
    json answers = json::array();
    for (const auto& a : r.answers) answers.push_back({{"entity", a.entity}, {"confidence", a.confidence}, {"rank", a.rank}});
    json nodes = json::array();
    for (const auto& n : r.nodes)
        nodes.push_back({{"id", n.id}, {"role", reasoner::node_role_name(n.role)}, {"layer", n.layer}});
    json edges = json::array();
    for (const auto& e : r.edges)
        edges.push_back({{"source", e.source}, {"predicate", e.predicate}, {"target", e.target}, {"from_cr", e.from_cr}});
    return json{{"schema_version", r.schema_version},
                {"answers", answers},
                {"query_graph", r.query_graph},
                {"subgraph", {{"nodes", nodes}, {"edges", edges}}},
                {"timing", r.timing_ms}};
}

QueryResponse response_from_json(const json& j) {
    QueryResponse r;
    try {
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kSchemaVersion)
            throw FormatError("unsupported schema_version " + std::to_string(r.schema_version));
        for (const auto& a : j.at("answers"))
            r.answers.push_back({a.at("entity").get<std::string>(), a.at("confidence").get<double>(), a.at("rank").get<int>()});
        r.query_graph = j.at("query_graph");
        qg::parse_query_graph(r.query_graph.dump());
        for (const auto& n : j.at("subgraph").at("nodes")) {
            reasoner::SubgraphNode node;
            node.id = n.at("id").get<std::string>();
            const auto role = n.at("role").get<std::string>();
            if (role == "query-entity")
                node.role = reasoner::NodeRole::query_entity;
            else if (role == "reasoned")
                node.role = reasoner::NodeRole::reasoned;
            else if (role == "context")
                node.role = reasoner::NodeRole::context;
            else
                throw FormatError("unknown node role '" + role + "'");
            node.layer = n.at("layer").get<int>();
            r.nodes.push_back(std::move(node));
        }
        for (const auto& e : j.at("subgraph").at("edges"))
            r.edges.push_back({e.at("source").get<std::string>(), e.at("predicate").get<std::string>(),
                               e.at("target").get<std::string>(), e.at("from_cr").get<bool>()});
        r.timing_ms = j.at("timing").get<std::map<std::string, double>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("query response: ") + e.what());
    }
    return r;
}

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::parse:
        case ErrorCode::format:
        case ErrorCode::validation: return 400;
        case ErrorCode::not_found: return 404;
        case ErrorCode::link_failure:
        case ErrorCode::unsupported_query: return 422;
        case ErrorCode::annotation_service: return 502;
        default: return 500;
    }
}

json error_payload(const Error& e) {
    json j = dump_error(e.code(), e.what());
    auto& body = j["error"];
    if (const auto* lf = dynamic_cast<const LinkFailure*>(&e)) body["phrase"] = lf->phrase();
    if (const auto* uq = dynamic_cast<const UnsupportedQuery*>(&e)) body["chunks"] = uq->chunks();
    if (const auto* nf = dynamic_cast<const NotFoundError*>(&e)) body["id"] = nf->id();
    return j;
}

GraphFragment graph_neighbors(const kg::KnowledgeGraph& kg, std::string_view id, int depth, std::size_t max_edges) {
    if (depth < 0 || depth > kMaxGraphDepth)
        throw ValidationError("depth must be between 0 and " + std::to_string(kMaxGraphDepth));
    const auto start = kg.index_of(id);
    if (!start) throw NotFoundError(std::string(id));

    GraphFragment g;
    g.center = std::string(id);
    g.depth = depth;
    std::map<kg::KnowledgeGraph::NodeIndex, int> dist{{*start, 0}};
    std::set<kg::KnowledgeGraph::EdgeIndex> taken;
    std::deque<kg::KnowledgeGraph::NodeIndex> queue{*start};
    g.nodes.push_back(kg.entity_at(*start).id);
    while (!queue.empty() && !g.truncated) {
        const auto n = queue.front();
        queue.pop_front();
        if (dist[n] == depth) continue;
        std::vector<kg::KnowledgeGraph::EdgeIndex> incident = kg.out_edges(n);
        incident.insert(incident.end(), kg.in_edges(n).begin(), kg.in_edges(n).end());
        std::sort(incident.begin(), incident.end());
        for (auto e : incident) {
            if (taken.count(e)) continue;
            if (taken.size() == max_edges) {
                g.truncated = true;
                break;
            }
            taken.insert(e);
            g.edges.push_back(kg.edge(e));
            const auto other = kg.source_of(e) == n ? kg.target_of(e) : kg.source_of(e);
            if (dist.emplace(other, dist[n] + 1).second) {
                g.nodes.push_back(kg.entity_at(other).id);
                queue.push_back(other);
            }
        }
    }
    return g;
}

json to_json(const GraphFragment& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes) nodes.push_back({{"id", n}});
    json edges = json::array();
    for (const auto& e : g.edges)
        edges.push_back({{"source", e.source}, {"predicate", e.predicate}, {"target", e.target}, {"weight", e.weight}});
    return json{{"schema_version", kSchemaVersion}, {"center", g.center}, {"depth", g.depth},
                {"nodes", nodes}, {"edges", edges}, {"truncated", g.truncated}};
}

Reply Service::query(std::string_view body) const {
    try {
        json parsed;
        try {
            parsed = json::parse(body);
        } catch (const json::exception& e) {
            throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
        }
        const auto req = parse_query_request(parsed);
        const auto options = apply_overrides(req.overrides, config_.defaults);
        annotation::AnnotatedQuery q;
        if (req.annotated) {
            q = annotation::parse_annotated(*req.annotated);
        } else {
            if (!config_.annotator_url)
                throw ValidationError("'text' requires an annotation service; send 'annotated' instead");
            q = annotation::fetch_annotation(*config_.annotator_url, *req.text);
        }
        return reply(200, to_json(make_response(pipeline::answer(engine_, q, options))));
    } catch (const Error& e) {
        return reply(http_status(e.code()), error_payload(e));
    } catch (const std::exception& e) {
        spdlog::error("query failed: {}", e.what());
        return reply(500, json{{"error", {{"code", "internal"}, {"message", e.what()}}}});
    }
}

Reply Service::graph(std::string_view id, std::optional<std::string_view> depth) const {
    try {
        int d = 1;
        if (depth) {
            const auto [ptr, ec] = std::from_chars(depth->data(), depth->data() + depth->size(), d);
            if (ec != std::errc{} || ptr != depth->data() + depth->size())
                throw ValidationError("depth must be an integer");
        }
        return reply(200, to_json(graph_neighbors(engine_.kg, id, d)));
    } catch (const Error& e) {
        return reply(http_status(e.code()), error_payload(e));
    }
}

Reply Service::health() const {
    return reply(200, json{{"status", "ok"},
                           {"schema_version", kSchemaVersion},
                           {"entities", engine_.kg.entity_count()},
                           {"edges", engine_.kg.edge_count()},
                           {"model", engine_.model ? std::string(decision::model_kind_name(engine_.model->kind())) : "none"}});
}

void mount(httplib::Server& server, const Service& service, std::string allowed_origin) {
    server.set_default_headers({{"Access-Control-Allow-Origin", allowed_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    const auto send = [](httplib::Response& res, const Reply& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Post("/api/query", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.query(req.body));
    });
    server.Get(R"(/api/graph/([^/]+))", [&service, send](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> depth;
        if (req.has_param("depth")) depth = req.get_param_value("depth");
        const std::string id = httplib::detail::decode_url(req.matches[1].str(), false);
        send(res, service.graph(id, depth ? std::optional<std::string_view>(*depth) : std::nullopt));
    });
    server.Get("/api/health", [&service, send](const httplib::Request&, httplib::Response& res) {
        send(res, service.health());
    });
}

int port_from_env(int fallback) {
    if (const char* v = std::getenv("KGQA_PORT"); v && *v) {
        int port = 0;
        const std::string_view s(v);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), port);
        if (ec == std::errc{} && ptr == s.data() + s.size() && port > 0 && port < 65536) return port;
        spdlog::warn("ignoring invalid KGQA_PORT '{}'", s);
    }
    return fallback;
}

} // namespace kgqa::service
