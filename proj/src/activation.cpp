#include "kgqa/activation.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "kgqa/error.hpp"

namespace kgqa::activation {

void ActivationParams::validate() const {
    if (!(active_threshold > 0.0 && active_threshold < 1.0))
        throw ValidationError("active threshold must lie in (0,1)");
    if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw ValidationError("decay factor must lie in (0,1)");
    if (max_iterations <= 0) throw ValidationError("iteration limit must be positive");
    if (!(seed_activation > active_threshold && seed_activation <= 1.0))
        throw ValidationError("seed activation must lie in (AT,1]");
}

double propagate(double a_j, double a_i, double weight, double decay_factor) noexcept {
    return a_j + a_i * weight * decay_factor;
}

double adjust(double a_j, double a_j_temp, double active_threshold) noexcept {
    if (a_j_temp >= 1.0) return 1.0;
    if (a_j_temp >= active_threshold) return a_j_temp;
    return a_j;
}

ActivationState ActivationState::seeded(const KnowledgeGraph& kg, NodeIndex seed, const ActivationParams& params) {
    ActivationState s;
    s.activation.assign(kg.entity_count(), 0.0);
    s.activation.at(seed) = params.seed_activation;
    s.frontier = {seed};
    return s;
}

std::size_t ActivationState::active_count(double active_threshold) const {
    return static_cast<std::size_t>(
        std::count_if(activation.begin(), activation.end(), [&](double a) { return a >= active_threshold; }));
}

ActivationState spread_step(const ActivationState& state, const KnowledgeGraph& kg, const ActivationParams& params,
                            Barrier* barrier) {
    const std::size_t n = kg.entity_count();
    std::vector<double> incoming(n, 0.0);
    std::vector<char> touched(n, 0);
    std::set<std::pair<EdgeIndex, NodeIndex>> crossed;

    const auto visit = [&](NodeIndex i, NodeIndex j, EdgeIndex e) {
        if (barrier && barrier->members[j]) {
            if (crossed.insert({e, j}).second) {
                const auto& edge = kg.edge(e);
                barrier->crossings.push_back(CrossoverRelation{kg.entity_at(j).id, edge.predicate, edge.weight,
                                                               kg.entity_at(i).id, e, kg.source_of(e) == i});
            }
            return;
        }
        incoming[j] += state.activation[i] * kg.edge(e).weight * params.decay_factor;
        touched[j] = 1;
    };

    for (NodeIndex i : state.frontier) {
        for (EdgeIndex e : kg.out_edges(i)) visit(i, kg.target_of(e), e);
        for (EdgeIndex e : kg.in_edges(i)) {
            if (kg.source_of(e) == i) continue; // self-loop already seen
            visit(i, kg.source_of(e), e);
        }
    }

    ActivationState next;
    next.activation = state.activation;
    next.iteration = state.iteration + 1;
    for (NodeIndex j = 0; j < n; ++j) {
        if (!touched[j]) continue;
        const double before = state.activation[j];
        const double after = adjust(before, before + incoming[j], params.active_threshold);
        next.activation[j] = after;
        if (before < params.active_threshold && after >= params.active_threshold) next.frontier.push_back(j);
    }
    return next;
}

ActivationState spread(const KnowledgeGraph& kg, NodeIndex seed, const ActivationParams& params, Barrier* barrier) {
    params.validate();
    auto state = ActivationState::seeded(kg, seed, params);
    while (!state.frontier.empty() && state.iteration < params.max_iterations &&
           state.active_count(params.active_threshold) < kg.entity_count()) {
        state = spread_step(state, kg, params, barrier);
    }
    return state;
}

std::map<std::string, double> active_nodes(const ActivationState& state, const KnowledgeGraph& kg,
                                           double active_threshold) {
    std::map<std::string, double> out;
    for (NodeIndex i = 0; i < state.activation.size(); ++i)
        if (state.activation[i] >= active_threshold) out.emplace(kg.entity_at(i).id, state.activation[i]);
    return out;
}

SubgraphResult subgraph_search(const KnowledgeGraph& kg, const std::string& node_subj, const std::string& node_obj,
                               const ActivationParams& params) {
    params.validate();
    const auto subj = kg.index_of(node_subj);
    const auto obj = kg.index_of(node_obj);
    if (!subj) throw NotFoundError(node_subj);
    if (!obj) throw NotFoundError(node_obj);

    SubgraphResult r;
    r.node_subj = node_subj;
    r.node_obj = node_obj;

    const auto subj_state = spread(kg, *subj, params);
    r.subj_rounds = subj_state.iteration;
    r.sg_subj = active_nodes(subj_state, kg, params.active_threshold);

    std::vector<char> members(kg.entity_count(), 0);
    for (NodeIndex i = 0; i < members.size(); ++i)
        members[i] = subj_state.activation[i] >= params.active_threshold ? 1 : 0;
    Barrier barrier{members, r.cr};
    const auto obj_state = spread(kg, *obj, params, &barrier);
    r.obj_rounds = obj_state.iteration;
    r.sg_obj = active_nodes(obj_state, kg, params.active_threshold);

    r.sg = r.sg_subj;
    for (const auto& [id, a] : r.sg_obj) {
        auto [it, inserted] = r.sg.emplace(id, a);
        if (!inserted) it->second = std::max(it->second, a);
    }
    return r;
}

std::string link_term(const KnowledgeGraph& kg, const qg::Term& term) {
    if (term.entity) {
        if (!kg.contains(*term.entity)) throw NotFoundError(*term.entity);
        return *term.entity;
    }
    switch (term.wildcard) {
    case qg::Wildcard::person:
    case qg::Wildcard::date: {
        const std::string id = to_lower(qg::wildcard_name(term.wildcard));
        if (!kg.contains(id)) throw LinkFailure(id);
        return id;
    }
    case qg::Wildcard::any_entity:
    case qg::Wildcard::any_relation:
        throw ValidationError("wildcard " + std::string(qg::wildcard_name(term.wildcard)) + " has no node");
    case qg::Wildcard::none: break;
    }
    return kg::link_entity(kg, term.words);
}

SubgraphResult subgraph_search(const KnowledgeGraph& kg, const qg::ConstraintQuad& quad,
                               const ActivationParams& params) {
    return subgraph_search(kg, link_term(kg, quad.category), link_term(kg, quad.property), params);
}

std::vector<std::string> candidate_answers(const std::map<std::string, double>& sg_subj, const KnowledgeGraph& kg,
                                           const std::string& category) {
    if (!sg_subj.count(category)) return {};
    const auto is_a_children = [&](const std::string& id) {
        std::vector<std::string> out;
        for (EdgeIndex e : kg.in_edges(*kg.index_of(id))) {
            const auto& edge = kg.edge(e);
            if (edge.predicate == kg::kIsA && edge.source != id && sg_subj.count(edge.source))
                out.push_back(edge.source);
        }
        return out;
    };

    std::set<std::string> seen{category};
    std::deque<std::string> queue{category};
    std::vector<std::string> leaves;
    while (!queue.empty()) {
        auto id = queue.front();
        queue.pop_front();
        auto children = is_a_children(id);
        if (children.empty()) leaves.push_back(id);
        for (auto& c : children)
            if (seen.insert(c).second) queue.push_back(std::move(c));
    }
    std::sort(leaves.begin(), leaves.end());
    return leaves;
}

std::vector<std::string> candidate_answers(const SubgraphResult& result, const KnowledgeGraph& kg,
                                           const std::string& category) {
    return candidate_answers(result.sg_subj, kg, category);
}

} // namespace kgqa::activation
