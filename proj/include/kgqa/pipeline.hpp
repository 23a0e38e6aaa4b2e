#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kgqa/annotation.hpp"
#include "kgqa/chunking.hpp"
#include "kgqa/decision.hpp"
#include "kgqa/kg_store.hpp"
#include "kgqa/query_graph.hpp"
#include "kgqa/reasoner.hpp"
#include "kgqa/semantics.hpp"

namespace kgqa::pipeline {

struct BuildInputs {
    std::filesystem::path triples;
    std::optional<std::filesystem::path> synonyms;
    std::optional<std::filesystem::path> equivalence;
    std::optional<std::filesystem::path> types;
    kg::WeightConfig weights;
};

struct BuildReport {
    std::size_t merged_synonyms = 0;
    std::size_t head_edges = 0;
    std::size_t equivalence_edges = 0;
    std::size_t type_edges = 0;
};

/// Load, then synonyms, head-rule hierarchy, equivalence rules, entity types.
kg::KnowledgeGraph build_kg(const BuildInputs& in, BuildReport* report = nullptr);

/// Loaded once, then shared read-only across queries.
struct Engine {
    kg::KnowledgeGraph kg;
    semantics::Semantics sem;
    std::unique_ptr<decision::DecisionModel> model;
    chunking::Grammar grammar = chunking::default_grammar();
};

Engine load_engine(const std::filesystem::path& snapshot, const std::filesystem::path& embeddings,
                   const std::filesystem::path& model);

struct QueryOutcome {
    annotation::AnnotatedQuery query;
    std::vector<chunking::Chunk> chunks;
    qg::QueryGraph graph;
    reasoner::SolveResult result;
    /// Milliseconds per stage: chunk, query_graph, solve.
    std::map<std::string, double> timing_ms;
};

QueryOutcome answer(const Engine& engine, const annotation::AnnotatedQuery& q, const reasoner::SolveOptions& options);

} // namespace kgqa::pipeline
