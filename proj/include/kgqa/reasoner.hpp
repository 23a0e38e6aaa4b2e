#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/activation.hpp"
#include "kgqa/decision.hpp"
#include "kgqa/kg_store.hpp"
#include "kgqa/query_graph.hpp"
#include "kgqa/semantics.hpp"

namespace kgqa::reasoner {

using kg::KnowledgeGraph;

enum class CombineMode { intersection, union_ };

std::string_view combine_mode_name(CombineMode m) noexcept;
CombineMode parse_combine_mode(std::string_view name);

struct Answer {
    std::string entity;
    double confidence = 0.0;
    /// Per-quad decision confidences whose product is `confidence`.
    std::vector<double> factors;
};

enum class NodeRole { query_entity, reasoned, context };

std::string_view node_role_name(NodeRole r) noexcept;

struct SubgraphNode {
    std::string id;
    NodeRole role = NodeRole::context;
    int layer = 0;
};

struct SubgraphEdge {
    std::string source;
    std::string predicate;
    std::string target;
    bool from_cr = false;
};

struct ReasoningSubgraph {
    std::vector<SubgraphNode> nodes;
    std::vector<SubgraphEdge> edges;

    const SubgraphNode* node(std::string_view id) const;
};

struct CandidateRecord {
    std::string entity;
    decision::FeatureVector features;
    decision::Prediction decision;
    std::vector<decision::EvidenceTag> evidence;
};

/// Everything recorded while solving one quad in one branch.
struct QuadTrace {
    qg::QuadRecord quad;
    /// Outer answers substituted into this branch, as "phrase=entity".
    std::vector<std::string> bindings;
    std::vector<double> upstream;
    std::optional<std::string> node_subj;
    std::optional<std::string> node_obj;
    std::map<std::string, double> sg_subj;
    std::map<std::string, double> sg_obj;
    std::vector<activation::CrossoverRelation> cr;
    std::vector<CandidateRecord> candidates;
    /// Accepted candidates with their own decision confidence.
    std::vector<Answer> accepted;
};

struct SolveResult {
    std::vector<Answer> answers;
    ReasoningSubgraph explanation;
    std::vector<QuadTrace> trace;
};

struct SolveOptions {
    activation::ActivationParams activation;
    CombineMode combine = CombineMode::intersection;
    std::optional<std::uint64_t> seed;
};

/// Solves one (already substituted) quad: fills node, subgraph, candidate and accepted fields.
using QuadSolver = std::function<QuadTrace(const qg::QuadRecord&)>;

/// Same-layer combination of per-quad accepted answers.
std::vector<Answer> combine_same_layer(const std::vector<std::vector<Answer>>& per_quad, CombineMode mode);

/// Layered solving: outer layers first, one pruned query graph per accepted outer answer,
/// confidences multiplied along the way. Does not build the explanation.
SolveResult solve_layers(const qg::QueryGraph& qg, const QuadSolver& solver, const SolveOptions& options);

/// Spreading activation plus decision making for a single quad.
QuadTrace solve_quad(const KnowledgeGraph& kg, const qg::QuadRecord& quad, const activation::ActivationParams& params,
                     const decision::DecisionModel& model, const semantics::Semantics& sem);

ReasoningSubgraph assemble_explanation(const std::vector<QuadTrace>& trace, const KnowledgeGraph& kg);

SolveResult solve(const KnowledgeGraph& kg, const qg::QueryGraph& qg, const SolveOptions& options,
                  const decision::DecisionModel& model, const semantics::Semantics& sem);

/// Descending confidence, ties by entity id.
void sort_answers(std::vector<Answer>& answers);

} // namespace kgqa::reasoner
