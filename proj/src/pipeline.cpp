#include "kgqa/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "kgqa/error.hpp"

namespace kgqa::pipeline {

namespace {

std::ifstream open(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw FormatError("cannot open " + p.string());
    return in;
}

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

} // namespace

kg::KnowledgeGraph build_kg(const BuildInputs& in, BuildReport* report) {
    BuildReport r;
    auto triples = open(in.triples);
    auto g = kg::load_triples(triples, in.weights);

    auto pairs = kg::synonym_pairs_from_edges(g);
    if (in.synonyms) {
        auto s = open(*in.synonyms);
        auto more = kg::read_synonym_pairs(s);
        pairs.insert(pairs.end(), more.begin(), more.end());
    }
    r.merged_synonyms = kg::apply_synonyms(g, pairs);
    r.head_edges = kg::derive_head_hierarchy(g);
    if (in.equivalence) {
        auto s = open(*in.equivalence);
        r.equivalence_edges = kg::expand_equivalence(g, kg::read_equivalence_rules(s));
    }
    if (in.types) {
        auto s = open(*in.types);
        r.type_edges = kg::apply_entity_types(g, kg::read_type_assertions(s));
    }
    if (report) *report = r;
    return g;
}

Engine load_engine(const std::filesystem::path& snapshot, const std::filesystem::path& embeddings,
                   const std::filesystem::path& model) {
    Engine e;
    e.kg = kg::load_snapshot(snapshot);
    e.kg.freeze();
    e.sem.store = semantics::load_embeddings(embeddings);
    e.model = decision::load_model(model);
    return e;
}

QueryOutcome answer(const Engine& engine, const annotation::AnnotatedQuery& q, const reasoner::SolveOptions& options) {
    if (!engine.model) throw Error(ErrorCode::model_state, "no decision model loaded");
    QueryOutcome out;
    out.query = q;
    Stopwatch sw;
    out.chunks = chunking::chunk(q, engine.grammar);
    out.timing_ms["chunk"] = sw.lap();
    out.graph = qg::build_query_graph(q, out.chunks);
    out.timing_ms["query_graph"] = sw.lap();
    out.result = reasoner::solve(engine.kg, out.graph, options, *engine.model, engine.sem);
    out.timing_ms["solve"] = sw.lap();
    return out;
}

} // namespace kgqa::pipeline
