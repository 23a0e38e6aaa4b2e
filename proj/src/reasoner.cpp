#include "kgqa/reasoner.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "kgqa/error.hpp"

namespace kgqa::reasoner {

using activation::CrossoverRelation;
using EdgeIndex = KnowledgeGraph::EdgeIndex;
using NodeIndex = KnowledgeGraph::NodeIndex;

std::string_view combine_mode_name(CombineMode m) noexcept {
    return m == CombineMode::intersection ? "intersection" : "union";
}

CombineMode parse_combine_mode(std::string_view name) {
    if (name == "intersection") return CombineMode::intersection;
    if (name == "union") return CombineMode::union_;
    throw ValidationError("combine mode must be 'intersection' or 'union', got '" + std::string(name) + "'");
}

std::string_view node_role_name(NodeRole r) noexcept {
    switch (r) {
    case NodeRole::query_entity: return "query-entity";
    case NodeRole::reasoned: return "reasoned";
    case NodeRole::context: return "context";
    }
    return "";
}

const SubgraphNode* ReasoningSubgraph::node(std::string_view id) const {
    for (const auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

void sort_answers(std::vector<Answer>& answers) {
    std::sort(answers.begin(), answers.end(), [](const Answer& a, const Answer& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.entity < b.entity;
    });
}

namespace {

double product(const std::vector<double>& factors) {
    double p = 1.0;
    for (double f : factors) p *= f;
    return p;
}

Answer chained(const Answer& a, const std::vector<double>& upstream) {
    Answer out;
    out.entity = a.entity;
    out.factors = upstream;
    out.factors.insert(out.factors.end(), a.factors.begin(), a.factors.end());
    out.confidence = product(out.factors);
    return out;
}

void merge_best(std::map<std::string, Answer>& into, const Answer& a) {
    auto [it, inserted] = into.emplace(a.entity, a);
    if (!inserted && a.confidence > it->second.confidence) it->second = a;
}

} // namespace

std::vector<Answer> combine_same_layer(const std::vector<std::vector<Answer>>& per_quad, CombineMode mode) {
    std::map<std::string, std::vector<std::size_t>> accepted_by;
    for (std::size_t q = 0; q < per_quad.size(); ++q)
        for (const auto& a : per_quad[q]) accepted_by[a.entity].push_back(q);

    std::vector<Answer> out;
    for (const auto& [entity, quads] : accepted_by) {
        if (mode == CombineMode::intersection && quads.size() != per_quad.size()) continue;
        Answer combined;
        combined.entity = entity;
        for (std::size_t q : quads) {
            for (const auto& a : per_quad[q]) {
                if (a.entity != entity) continue;
                combined.factors.insert(combined.factors.end(), a.factors.begin(), a.factors.end());
                break;
            }
        }
        combined.confidence = product(combined.factors);
        out.push_back(std::move(combined));
    }
    sort_answers(out);
    return out;
}

namespace {

class LayeredSolver {
public:
    LayeredSolver(const QuadSolver& solver, const SolveOptions& options, std::vector<QuadTrace>& trace)
        : solver_(solver), options_(options), trace_(trace) {}

    std::map<std::string, Answer> run(const std::vector<qg::QuadRecord>& quads, const std::vector<double>& upstream,
                                      const std::vector<std::string>& bindings) {
        std::map<std::string, Answer> out;
        if (quads.empty()) return out;
        int top = 0;
        for (const auto& r : quads) top = std::max(top, r.quad.layer);

        qg::QueryGraph current;
        std::vector<qg::QuadRecord> rest;
        for (const auto& r : quads) (r.quad.layer == top ? current.quads : rest).push_back(r);

        std::vector<std::string> groups;
        std::map<std::string, std::vector<std::vector<Answer>>> per_group;
        for (const auto& r : qg::solving_order(current, options_.seed)) {
            QuadTrace t = solve_cached(r);
            t.upstream = upstream;
            t.bindings = bindings;
            const auto category = r.quad.category.text();
            if (!per_group.count(category)) groups.push_back(category);
            per_group[category].push_back(t.accepted);
            trace_.push_back(std::move(t));
        }
        std::map<std::string, std::vector<Answer>> combined;
        for (const auto& g : groups) combined[g] = combine_same_layer(per_group[g], options_.combine);

        if (rest.empty()) {
            for (const auto& g : groups)
                for (const auto& a : combined[g]) merge_best(out, chained(a, upstream));
            return out;
        }

        // Groups whose category is the property of an inner quad feed the next layer.
        std::vector<std::string> feeding;
        for (const auto& g : groups) {
            const bool feeds = std::any_of(rest.begin(), rest.end(), [&](const qg::QuadRecord& r) {
                return r.quad.layer == top - 1 && !r.quad.property.is_wildcard() && !r.quad.property.entity &&
                       r.quad.property.text() == g;
            });
            if (feeds) feeding.push_back(g);
        }
        if (feeding.empty()) return run(rest, upstream, bindings);
        for (const auto& g : feeding)
            if (combined[g].empty()) return out;

        std::vector<std::size_t> pick(feeding.size(), 0);
        while (true) {
            std::vector<qg::QuadRecord> pruned = rest;
            std::vector<double> up = upstream;
            std::vector<std::string> bound = bindings;
            for (std::size_t k = 0; k < feeding.size(); ++k) {
                const Answer& a = combined[feeding[k]][pick[k]];
                up.insert(up.end(), a.factors.begin(), a.factors.end());
                bound.push_back(feeding[k] + "=" + a.entity);
                for (auto& r : pruned) {
                    if (r.quad.layer == top - 1 && !r.quad.property.is_wildcard() && !r.quad.property.entity &&
                        r.quad.property.text() == feeding[k])
                        r.quad.property = qg::Term::of_entity(a.entity);
                }
            }
            for (const auto& [id, a] : run(pruned, up, bound)) merge_best(out, a);

            std::size_t k = 0;
            while (k < pick.size() && ++pick[k] == combined[feeding[k]].size()) pick[k++] = 0;
            if (k == pick.size()) break;
        }
        return out;
    }

private:
    QuadTrace solve_cached(const qg::QuadRecord& r) {
        const auto key = r.quad.to_string() + "#" + std::to_string(r.pattern);
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(key, solver_(r)).first;
        return it->second;
    }

    const QuadSolver& solver_;
    const SolveOptions& options_;
    std::vector<QuadTrace>& trace_;
    std::map<std::string, QuadTrace> cache_;
};

std::vector<CrossoverRelation> incident_relations(const KnowledgeGraph& kg, const std::string& subj_side,
                                                  const std::optional<std::string>& only_obj) {
    std::vector<CrossoverRelation> out;
    const NodeIndex n = *kg.index_of(subj_side);
    std::vector<EdgeIndex> edges = kg.out_edges(n);
    for (EdgeIndex e : kg.in_edges(n))
        if (kg.source_of(e) != n) edges.push_back(e);
    std::sort(edges.begin(), edges.end());
    for (EdgeIndex e : edges) {
        const auto& edge = kg.edge(e);
        if (edge.predicate == kg::kIsA) continue;
        const std::string& other = kg.source_of(e) == n ? edge.target : edge.source;
        if (only_obj && other != *only_obj) continue;
        out.push_back(CrossoverRelation{subj_side, edge.predicate, edge.weight, other, e, edge.source == other});
    }
    return out;
}

} // namespace

SolveResult solve_layers(const qg::QueryGraph& qg, const QuadSolver& solver, const SolveOptions& options) {
    SolveResult result;
    LayeredSolver layered(solver, options, result.trace);
    for (auto& [id, a] : layered.run(qg.quads, {}, {})) result.answers.push_back(std::move(a));
    sort_answers(result.answers);
    return result;
}

QuadTrace solve_quad(const KnowledgeGraph& kg, const qg::QuadRecord& rec, const activation::ActivationParams& params,
                     const decision::DecisionModel& model, const semantics::Semantics& sem) {
    QuadTrace t;
    t.quad = rec;
    const auto& q = rec.quad;
    std::optional<std::string> predicate;
    if (q.predicate.wildcard != qg::Wildcard::any_relation) predicate = q.predicate.text();

    std::vector<std::string> candidates;
    std::map<std::string, std::vector<CrossoverRelation>> evidence_edges;
    decision::Constraint constraint{std::nullopt, predicate};
    std::size_t n_sub = 0;

    if (q.property.wildcard == qg::Wildcard::any_entity) {
        const auto c = activation::link_term(kg, q.category);
        t.node_subj = c;
        const auto state = activation::spread(kg, *kg.index_of(c), params);
        t.sg_subj = activation::active_nodes(state, kg, params.active_threshold);
        candidates = activation::candidate_answers(t.sg_subj, kg, c);
        for (const auto& cand : candidates) {
            auto rels = incident_relations(kg, cand, std::nullopt);
            t.cr.insert(t.cr.end(), rels.begin(), rels.end());
            evidence_edges[cand] = std::move(rels);
        }
    } else if (q.category.wildcard == qg::Wildcard::any_entity) {
        const auto o = activation::link_term(kg, q.property);
        t.node_obj = o;
        t.sg_obj = {{o, params.seed_activation}};
        constraint.c_obj = o;
        n_sub = kg::subclasses(kg, o).size();
        std::set<std::string> neighbours;
        for (const auto& rel : incident_relations(kg, o, std::nullopt)) neighbours.insert(rel.obj_side_node);
        for (const auto& cand : neighbours) {
            auto rels = incident_relations(kg, cand, o);
            t.cr.insert(t.cr.end(), rels.begin(), rels.end());
            evidence_edges[cand] = std::move(rels);
            candidates.push_back(cand);
        }
    } else {
        const auto c = activation::link_term(kg, q.category);
        const auto o = activation::link_term(kg, q.property);
        auto r = activation::subgraph_search(kg, c, o, params);
        t.node_subj = c;
        t.node_obj = o;
        t.sg_subj = r.sg_subj;
        t.sg_obj = r.sg_obj;
        t.cr = r.cr;
        constraint.c_obj = o;
        n_sub = kg::subclasses(kg, o).size();
        candidates = activation::candidate_answers(r, kg, c);
        for (const auto& cand : candidates) evidence_edges[cand] = t.cr;
    }

    for (const auto& cand : candidates) {
        CandidateRecord rec_c;
        rec_c.entity = cand;
        rec_c.evidence = decision::classify_evidence(cand, constraint, evidence_edges[cand], kg, sem);
        rec_c.features = decision::extract_features(rec_c.evidence, candidates.size(), n_sub);
        rec_c.decision = model.predict(rec_c.features);
        if (rec_c.decision.label == 1)
            t.accepted.push_back(Answer{cand, rec_c.decision.confidence, {rec_c.decision.confidence}});
        t.candidates.push_back(std::move(rec_c));
    }
    sort_answers(t.accepted);
    return t;
}

namespace {

// Shortest undirected path from `from` to `to` through `allowed` nodes; edge indexes in order.
std::vector<EdgeIndex> shortest_path(const KnowledgeGraph& kg, const std::string& from, const std::string& to,
                                     const std::set<std::string>& allowed) {
    if (from == to) return {};
    const auto src = kg.index_of(from);
    const auto dst = kg.index_of(to);
    if (!src || !dst) return {};
    std::map<NodeIndex, std::pair<NodeIndex, EdgeIndex>> parent;
    std::deque<NodeIndex> queue{*src};
    std::set<NodeIndex> seen{*src};
    while (!queue.empty()) {
        const NodeIndex u = queue.front();
        queue.pop_front();
        if (u == *dst) break;
        std::vector<EdgeIndex> edges = kg.out_edges(u);
        edges.insert(edges.end(), kg.in_edges(u).begin(), kg.in_edges(u).end());
        std::sort(edges.begin(), edges.end());
        for (EdgeIndex e : edges) {
            const NodeIndex v = kg.source_of(e) == u ? kg.target_of(e) : kg.source_of(e);
            if (seen.count(v) || !allowed.count(kg.entity_at(v).id)) continue;
            seen.insert(v);
            parent[v] = {u, e};
            queue.push_back(v);
        }
    }
    if (!parent.count(*dst)) return {};
    std::vector<EdgeIndex> path;
    for (NodeIndex v = *dst; v != *src; v = parent[v].first) path.push_back(parent[v].second);
    std::reverse(path.begin(), path.end());
    return path;
}

class ExplanationBuilder {
public:
    explicit ExplanationBuilder(const KnowledgeGraph& kg) : kg_(kg) {}

    void node(const std::string& id, NodeRole role, int layer) {
        auto it = index_.find(id);
        if (it == index_.end()) {
            index_[id] = out_.nodes.size();
            out_.nodes.push_back({id, role, layer});
            return;
        }
        auto& n = out_.nodes[it->second];
        if (static_cast<int>(role) < static_cast<int>(n.role)) {
            n.role = role;
            n.layer = layer;
        }
    }

    void edge(EdgeIndex e, bool from_cr, int layer) {
        const auto& edge = kg_.edge(e);
        node(edge.source, NodeRole::context, layer);
        node(edge.target, NodeRole::context, layer);
        auto [it, inserted] = edges_.emplace(e, out_.edges.size());
        if (inserted)
            out_.edges.push_back({edge.source, edge.predicate, edge.target, from_cr});
        else if (from_cr)
            out_.edges[it->second].from_cr = true;
    }

    ReasoningSubgraph take() { return std::move(out_); }

private:
    const KnowledgeGraph& kg_;
    ReasoningSubgraph out_;
    std::map<std::string, std::size_t> index_;
    std::map<EdgeIndex, std::size_t> edges_;
};

std::set<std::string> keys(const std::map<std::string, double>& m) {
    std::set<std::string> out;
    for (const auto& [k, v] : m) out.insert(k);
    return out;
}

} // namespace

ReasoningSubgraph assemble_explanation(const std::vector<QuadTrace>& trace, const KnowledgeGraph& kg) {
    ExplanationBuilder b(kg);
    for (const auto& t : trace) {
        const int layer = t.quad.quad.layer;
        if (t.node_subj)
            b.node(*t.node_subj, t.quad.quad.category.entity ? NodeRole::context : NodeRole::query_entity,
                   t.quad.quad.category.entity ? layer : 0);
        if (t.node_obj)
            b.node(*t.node_obj, t.quad.quad.property.entity ? NodeRole::context : NodeRole::query_entity,
                   t.quad.quad.property.entity ? layer : 0);
    }
    for (const auto& t : trace)
        for (const auto& a : t.accepted) b.node(a.entity, NodeRole::reasoned, t.quad.quad.layer);

    for (const auto& t : trace) {
        const int layer = t.quad.quad.layer;
        const auto subj_allowed = keys(t.sg_subj);
        auto obj_allowed = keys(t.sg_obj);
        if (t.node_obj) obj_allowed.insert(*t.node_obj);
        for (const auto& rel : t.cr) {
            b.edge(rel.edge, true, layer);
            if (t.node_subj)
                for (EdgeIndex e : shortest_path(kg, *t.node_subj, rel.subj_side_node, subj_allowed))
                    b.edge(e, false, layer);
            if (t.node_obj)
                for (EdgeIndex e : shortest_path(kg, *t.node_obj, rel.obj_side_node, obj_allowed))
                    b.edge(e, false, layer);
        }
    }
    return b.take();
}

SolveResult solve(const KnowledgeGraph& kg, const qg::QueryGraph& qg, const SolveOptions& options,
                  const decision::DecisionModel& model, const semantics::Semantics& sem) {
    options.activation.validate();
    if (qg.quads.empty()) throw ValidationError("empty query graph");

    if (qg.is_definition()) {
        // No constraint to score: the neighbourhood of the defined entity is the answer.
        const qg::QuadRecord* subject = nullptr;
        for (const auto& r : qg.quads)
            if (!r.quad.category.is_wildcard()) subject = &r;
        if (!subject) throw ValidationError("definition query without a subject");
        QuadTrace t;
        t.quad = *subject;
        const auto x = activation::link_term(kg, subject->quad.category);
        t.node_obj = x;
        t.sg_obj = {{x, options.activation.seed_activation}};
        std::set<std::string> neighbours;
        const NodeIndex n = *kg.index_of(x);
        std::vector<EdgeIndex> edges = kg.out_edges(n);
        edges.insert(edges.end(), kg.in_edges(n).begin(), kg.in_edges(n).end());
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        for (EdgeIndex e : edges) {
            const auto& edge = kg.edge(e);
            const std::string& other = kg.source_of(e) == n ? edge.target : edge.source;
            t.cr.push_back(CrossoverRelation{other, edge.predicate, edge.weight, x, e, edge.source == x});
            if (other != x) neighbours.insert(other);
        }
        for (const auto& id : neighbours) t.accepted.push_back(Answer{id, 1.0, {1.0}});
        SolveResult result;
        result.answers = t.accepted;
        sort_answers(result.answers);
        result.trace.push_back(std::move(t));
        result.explanation = assemble_explanation(result.trace, kg);
        return result;
    }

    const QuadSolver solver = [&](const qg::QuadRecord& r) {
        return solve_quad(kg, r, options.activation, model, sem);
    };
    auto result = solve_layers(qg, solver, options);
    result.explanation = assemble_explanation(result.trace, kg);
    return result;
}

} // namespace kgqa::reasoner
