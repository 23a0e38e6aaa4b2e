#pragma once

#include <map>
#include <string>
#include <vector>

#include "kgqa/kg_store.hpp"
#include "kgqa/query_graph.hpp"

namespace kgqa::activation {

using kg::KnowledgeGraph;
using NodeIndex = KnowledgeGraph::NodeIndex;
using EdgeIndex = KnowledgeGraph::EdgeIndex;

struct ActivationParams {
    double active_threshold = 0.8;
    double decay_factor = 0.85;
    int max_iterations = 30;
    double seed_activation = 1.0;

    /// Throws ValidationError unless 0 < AT < 1, 0 < DF < 1, ST > 0, AT < seed <= 1.
    void validate() const;
};

/// a_j + a_i * w * DF
double propagate(double a_j, double a_i, double weight, double decay_factor) noexcept;

/// Clamp at 1, accept at or above the threshold, otherwise keep the previous value.
double adjust(double a_j, double a_j_temp, double active_threshold) noexcept;

struct ActivationState {
    std::vector<double> activation; // indexed by NodeIndex
    std::vector<NodeIndex> frontier; // ascending
    int iteration = 0;

    static ActivationState seeded(const KnowledgeGraph& kg, NodeIndex seed, const ActivationParams& params);
    std::size_t active_count(double active_threshold) const;
};

struct CrossoverRelation {
    std::string subj_side_node;
    std::string predicate;
    double weight = 0.0;
    std::string obj_side_node;
    EdgeIndex edge = 0;
    /// True when the obj-side node is the edge's source.
    bool forward = true;

    friend bool operator==(const CrossoverRelation&, const CrossoverRelation&) = default;
};

/// Nodes that stop the spread; reaching one records a crossover instead.
struct Barrier {
    const std::vector<char>& members;
    std::vector<CrossoverRelation>& crossings;
};

/// One synchronous round: every frontier node pushes to all neighbours (both edge
/// directions); contributions are summed before adjustment. The new frontier holds the
/// nodes that crossed the threshold in this round.
ActivationState spread_step(const ActivationState& state, const KnowledgeGraph& kg,
                            const ActivationParams& params, Barrier* barrier = nullptr);

/// Repeats spread_step until the frontier empties, ST rounds pass, or every node is active.
ActivationState spread(const KnowledgeGraph& kg, NodeIndex seed, const ActivationParams& params,
                       Barrier* barrier = nullptr);

/// Active nodes (id -> activation).
std::map<std::string, double> active_nodes(const ActivationState& state, const KnowledgeGraph& kg,
                                           double active_threshold);

struct SubgraphResult {
    std::string node_subj;
    std::string node_obj;
    std::map<std::string, double> sg_subj;
    std::map<std::string, double> sg_obj;
    std::map<std::string, double> sg; // union; larger activation wins
    std::vector<CrossoverRelation> cr;
    int subj_rounds = 0;
    int obj_rounds = 0;
};

SubgraphResult subgraph_search(const KnowledgeGraph& kg, const std::string& node_subj,
                               const std::string& node_obj, const ActivationParams& params);

/// Links the category and property of a quad, then searches.
SubgraphResult subgraph_search(const KnowledgeGraph& kg, const qg::ConstraintQuad& quad,
                               const ActivationParams& params);

/// Resolves a quad term to a KG node: bound entity, PERSON/DATE type node, or linked phrase.
std::string link_term(const KnowledgeGraph& kg, const qg::Term& term);

/// Most-subclass nodes of sg_subj below the category node, sorted by id.
std::vector<std::string> candidate_answers(const std::map<std::string, double>& sg_subj,
                                           const KnowledgeGraph& kg, const std::string& category);
std::vector<std::string> candidate_answers(const SubgraphResult& result, const KnowledgeGraph& kg,
                                           const std::string& category);

} // namespace kgqa::activation
