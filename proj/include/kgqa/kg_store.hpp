#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "kgqa/text.hpp"

namespace kgqa::kg {

inline constexpr std::string_view kIsA = "is_a";
inline constexpr std::string_view kIsSynonymOf = "is_synonym_of";

struct Entity {
    std::string id;
    std::set<std::string> aliases;
};

struct RelationEdge {
    std::string source;
    std::string predicate;
    std::string target;
    double weight = 0.0;
};

/// Edge weights: one global default plus per-predicate overrides.
struct WeightConfig {
    double default_weight = 0.95;
    std::map<std::string, double> per_predicate;

    double weight_for(std::string_view predicate) const;
};

/// Entity/edge store with adjacency indexes.
///
/// The graph is built single-threaded; after freeze() every mutator throws and
/// the graph may be shared read-only between concurrent query evaluations.
/// Node indexes are dense and stable until the next synonym merge.
class KnowledgeGraph {
public:
    using NodeIndex = std::size_t;
    using EdgeIndex = std::size_t;

    explicit KnowledgeGraph(WeightConfig weights = {});

    /// Canonicalizes `surface` and creates the entity if missing.
    const std::string& ensure_entity(std::string_view surface);

    /// Adds (source, predicate, target) with the configured weight; endpoints are
    /// canonicalized and auto-created. Returns false for a duplicate triple.
    /// Throws CycleError when an is_a edge would close a cycle.
    bool add_edge(std::string_view source, std::string_view predicate, std::string_view target);
    bool add_edge(std::string_view source, std::string_view predicate, std::string_view target,
                  double weight);

    /// True when adding child is_a parent would close an is_a cycle.
    bool would_close_is_a_cycle(std::string_view child, std::string_view parent) const;

    void add_alias(std::string_view id, std::string_view alias);
    void set_synonym(std::string_view alias, std::string_view canonical);

    void freeze() noexcept { frozen_ = true; }
    bool frozen() const noexcept { return frozen_; }

    bool contains(std::string_view id) const;
    std::optional<NodeIndex> index_of(std::string_view id) const;
    const Entity& entity(std::string_view id) const;
    const Entity& entity_at(NodeIndex i) const { return entities_[i]; }
    const std::vector<Entity>& entities() const noexcept { return entities_; }
    std::size_t entity_count() const noexcept { return entities_.size(); }

    const std::vector<RelationEdge>& edges() const noexcept { return edges_; }
    const RelationEdge& edge(EdgeIndex e) const { return edges_[e]; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    NodeIndex source_of(EdgeIndex e) const { return endpoints_[e].first; }
    NodeIndex target_of(EdgeIndex e) const { return endpoints_[e].second; }
    const std::vector<EdgeIndex>& out_edges(NodeIndex n) const { return out_[n]; }
    const std::vector<EdgeIndex>& in_edges(NodeIndex n) const { return in_[n]; }
    bool has_edge(std::string_view source, std::string_view predicate,
                  std::string_view target) const;

    /// alias -> canonical id.
    const std::map<std::string, std::string>& synonym_map() const noexcept { return synonyms_; }
    const WeightConfig& weights() const noexcept { return weights_; }

private:
    friend std::size_t apply_synonyms(KnowledgeGraph&,
                                      std::span<const std::pair<std::string, std::string>>);

    void require_mutable() const;
    std::string is_a_path(NodeIndex from, NodeIndex to) const;
    bool insert_edge(RelationEdge e);

    WeightConfig weights_;
    std::vector<Entity> entities_;
    std::unordered_map<std::string, NodeIndex> index_;
    std::vector<RelationEdge> edges_;
    std::vector<std::pair<NodeIndex, NodeIndex>> endpoints_;
    std::vector<std::vector<EdgeIndex>> out_;
    std::vector<std::vector<EdgeIndex>> in_;
    std::set<std::tuple<std::string, std::string, std::string>> edge_keys_;
    std::map<std::string, std::string> synonyms_;
    bool frozen_ = false;
};

using SynonymPair = std::pair<std::string, std::string>;

struct EquivalenceRule {
    std::string trigger_predicate;
    std::string trigger_object;
    std::string derived_predicate;
    std::vector<std::string> derived_objects;
};

struct TypeAssertion {
    std::string entity;
    std::string type;
};

/// Named-entity categories accepted by apply_entity_types.
const std::set<std::string>& entity_type_vocabulary();

/// Reads `subject<TAB>predicate<TAB>object` records; `#` lines and blank lines are skipped.
KnowledgeGraph load_triples(std::istream& in, WeightConfig weights = {});
void load_triples_into(KnowledgeGraph& kg, std::istream& in);

std::vector<SynonymPair> read_synonym_pairs(std::istream& in);
std::vector<EquivalenceRule> read_equivalence_rules(std::istream& in);
std::vector<TypeAssertion> read_type_assertions(std::istream& in);

/// Existing is_synonym_of edges, returned as (alias, canonical) pairs.
std::vector<SynonymPair> synonym_pairs_from_edges(const KnowledgeGraph& kg);

/// Merges each alias into its canonical entity. Returns the number of merged entities.
std::size_t apply_synonyms(KnowledgeGraph& kg, std::span<const SynonymPair> pairs);

/// Adds child is_a head for every entity whose token sequence has another entity as a
/// strict suffix. Returns the number of added edges.
std::size_t derive_head_hierarchy(KnowledgeGraph& kg);

std::size_t expand_equivalence(KnowledgeGraph& kg, std::span<const EquivalenceRule> rules);

std::size_t apply_entity_types(KnowledgeGraph& kg, std::span<const TypeAssertion> assertions);

/// Transitive is_a ancestors, breadth-first with ties broken by id.
std::vector<std::string> superclasses(const KnowledgeGraph& kg, std::string_view id);
/// Transitive is_a descendants, breadth-first with ties broken by id.
std::vector<std::string> subclasses(const KnowledgeGraph& kg, std::string_view id);

/// Checks the is_a subgraph with a topological sort.
bool is_a_acyclic(const KnowledgeGraph& kg);

/// Canonical form used for linking: lowercase, nouns lemmatized, underscore-joined.
std::string canonical_phrase(std::span<const Word> phrase);

/// Resolves a phrase to an entity id: exact id, then synonym map, then singular/plural
/// variants. Throws LinkFailure carrying the canonical phrase.
std::string link_entity(const KnowledgeGraph& kg, std::span<const Word> phrase);

/// Splits an entity id back into words (underscore-separated, lemma = form).
std::vector<Word> words_of(std::string_view id);

void save_snapshot(const KnowledgeGraph& kg, std::ostream& out);
void save_snapshot(const KnowledgeGraph& kg, const std::filesystem::path& path);
KnowledgeGraph load_snapshot(std::istream& in);
KnowledgeGraph load_snapshot(const std::filesystem::path& path);

} // namespace kgqa::kg
