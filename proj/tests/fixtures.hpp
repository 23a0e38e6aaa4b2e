#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "kgqa/annotation.hpp"

namespace kgqa::testing {

inline std::filesystem::path data_path(const std::string& rel) {
    return std::filesystem::path(KGQA_DATA_DIR) / rel;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline annotation::AnnotatedQuery load_query(const std::string& name) {
    return annotation::parse_annotated(read_file(data_path("fixtures/queries/" + name + ".conllu")));
}

} // namespace kgqa::testing

#include "kgqa/pipeline.hpp"

namespace kgqa::testing {

inline pipeline::BuildInputs fixture_inputs() {
    pipeline::BuildInputs in;
    in.triples = data_path("fixtures/kg/triples.tsv");
    in.synonyms = data_path("fixtures/kg/synonyms.tsv");
    in.equivalence = data_path("fixtures/kg/equivalence.json");
    in.types = data_path("fixtures/kg/types.tsv");
    return in;
}

/// Fixture KG, fixture embeddings, and an MLP trained on the synthetic generator.
inline pipeline::Engine fixture_engine(decision::ModelKind kind = decision::ModelKind::mlp) {
    pipeline::Engine e;
    e.kg = pipeline::build_kg(fixture_inputs());
    e.kg.freeze();
    e.sem.store = semantics::load_embeddings(data_path("fixtures/kg/embeddings.txt"));
    e.model = decision::train(decision::generate_synthetic(1000, 7), kind);
    return e;
}

} // namespace kgqa::testing
