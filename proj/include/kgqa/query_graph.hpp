#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/annotation.hpp"
#include "kgqa/chunking.hpp"
#include "kgqa/text.hpp"

namespace kgqa::qg {

enum class Wildcard { none, person, date, any_entity, any_relation };

std::string_view wildcard_name(Wildcard w) noexcept;

/// One slot of a constraint quad: a phrase from the query, a wildcard, or (after an outer
/// layer has been solved) a bound KG entity.
struct Term {
    Wildcard wildcard = Wildcard::none;
    std::vector<Word> words;
    std::vector<int> tokens;
    std::optional<std::string> entity;

    static Term of_wildcard(Wildcard w);
    static Term of_entity(std::string id);

    bool is_wildcard() const noexcept { return wildcard != Wildcard::none; }
    /// Display form: wildcard name, bound entity id, or word forms joined by '_'.
    std::string text() const;
};

struct ConstraintQuad {
    Term category;
    Term predicate;
    Term property;
    int layer = 1;

    std::string to_string() const;
};

struct QuadRecord {
    ConstraintQuad quad;
    int pattern = 0; // extraction pattern 1..5
};

struct QueryGraph {
    std::vector<QuadRecord> quads;

    int max_layer() const noexcept;
    bool is_definition() const noexcept;
};

/// Applies the five extraction patterns. Throws UnsupportedQuery when none applies.
QueryGraph build_query_graph(const annotation::AnnotatedQuery& q,
                             const std::vector<chunking::Chunk>& chunks);

/// Outer layers first; document order inside a layer unless a shuffle seed is given.
std::vector<QuadRecord> solving_order(const QueryGraph& qg,
                                      std::optional<std::uint64_t> seed = std::nullopt);

/// Layer contiguity and outer-to-inner chaining. Returns a description of the first
/// violation, or nullopt when valid.
std::optional<std::string> check_invariants(const QueryGraph& qg);

/// JSON array of {category, predicate, property, layer, pattern} records.
std::string serialize(const QueryGraph& qg);
QueryGraph parse_query_graph(std::string_view json);

} // namespace kgqa::qg
