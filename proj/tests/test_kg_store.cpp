#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "kgqa/error.hpp"
#include "kgqa/kg_store.hpp"
#include "oracles.hpp"

using namespace kgqa;
using namespace kgqa::kg;

namespace {

KnowledgeGraph from_text(const std::string& text) {
    std::istringstream in(text);
    return load_triples(in);
}

bool has_edge(const KnowledgeGraph& g, const std::string& s, const std::string& p, const std::string& t) {
    for (const auto& e : g.edges())
        if (e.source == s && e.predicate == p && e.target == t) return true;
    return false;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::vector<Word> phrase(std::initializer_list<std::pair<const char*, const char*>> words) {
    std::vector<Word> out;
    for (const auto& [form, lemma] : words) out.push_back({form, lemma, "NN"});
    return out;
}

} // namespace

TEST_CASE("loading triples") {
    auto g = from_text("virtuoso\tsupport\tpython\n");
    CHECK(g.entity_count() == 2);
    CHECK(g.edge_count() == 1);
    CHECK(g.edges()[0].weight == 0.95);

    auto p = from_text("P4V\tis\tcross_platform\n");
    CHECK(p.contains("p4v"));
    CHECK(p.contains("cross_platform"));

    auto d = from_text("a\tb\tc\na\tb\tc\n# comment\n\n");
    CHECK(d.edge_count() == 1);

    auto spaced = from_text("Graph Database\tis_a\tDatabase\n");
    CHECK(spaced.contains("graph_database"));
}

TEST_CASE("load errors") {
    try {
        from_text("a\tb\tc\nbroken line\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(from_text("a\tis_a\tb\nb\tis_a\tc\nc\tis_a\ta\n"), CycleError);
    CHECK_THROWS_AS(from_text("a\tis_a\ta\n"), CycleError);
}

TEST_CASE("per-predicate weights") {
    WeightConfig w;
    w.default_weight = 0.9;
    w.per_predicate["is_a"] = 0.99;
    std::istringstream in("a\tis_a\tb\na\tsupport\tc\n");
    auto g = load_triples(in, w);
    CHECK(g.edges()[0].weight == 0.99);
    CHECK(g.edges()[1].weight == 0.9);
    KnowledgeGraph direct;
    CHECK_THROWS_AS(direct.add_edge("a", "rel", "b", 1.0), ValidationError);
}

TEST_CASE("synonym merging") {
    auto g = from_text("mpmjs\tis_a\tpackage_manager\nnpm\tis_a\tpackage_manager\nobject-database\tis_a\tdatabase\n"
                       "object-oriented-database\tis_a\tdatabase\nobject-database\tsupport\tjava\n");
    const std::size_t before = g.edge_count();
    const std::vector<SynonymPair> pairs{{"mpmjs", "npm"}, {"object-database", "object-oriented-database"}};
    CHECK(apply_synonyms(g, pairs) == 2);
    CHECK_FALSE(g.contains("mpmjs"));
    CHECK_FALSE(g.contains("object-database"));
    CHECK(g.entity("npm").aliases.count("mpmjs") == 1);
    CHECK(has_edge(g, "object-oriented-database", "support", "java"));
    // the two duplicate is_a edges collapse into their canonical counterparts
    CHECK(g.edge_count() == before - 2);
    CHECK(link_entity(g, phrase({{"mpmjs", "mpmjs"}})) == "npm");

    const std::size_t edges = g.edge_count();
    CHECK(apply_synonyms(g, std::vector<SynonymPair>{}) == 0);
    CHECK(apply_synonyms(g, std::vector<SynonymPair>{{"npm", "npm"}}) == 0);
    CHECK(g.edge_count() == edges);
}

TEST_CASE("synonym edges in the triple file") {
    auto g = from_text("mpmjs\tis_synonym_of\tnpm\nmpmjs\tsupport\tjavascript\n");
    CHECK(apply_synonyms(g, synonym_pairs_from_edges(g)) == 1);
    CHECK(has_edge(g, "npm", "support", "javascript"));
}

TEST_CASE("head-rule hierarchy") {
    auto g = from_text("programming_language\tx\ty\nobject-oriented_programming_language\tx\ty\n");
    CHECK(derive_head_hierarchy(g) == 1);
    CHECK(has_edge(g, "object-oriented_programming_language", "is_a", "programming_language"));
    CHECK(derive_head_hierarchy(g) == 0);

    auto dogs = from_text("red_dog\tx\ty\ndog\tx\ty\n");
    derive_head_hierarchy(dogs);
    CHECK(has_edge(dogs, "red_dog", "is_a", "dog"));

    auto langs = from_text("python\tx\tjava\n");
    CHECK(derive_head_hierarchy(langs) == 0);
}

TEST_CASE("equivalence rules") {
    auto g = from_text("P4V\tis\tcross_platform\n");
    std::ifstream rules_in(testing::data_path("fixtures/kg/equivalence.json"));
    const auto rules = read_equivalence_rules(rules_in);
    CHECK(expand_equivalence(g, rules) == 3);
    for (const char* os : {"microsoft_windows", "linux", "macos"}) CHECK(has_edge(g, "p4v", "run_on", os));
    CHECK(expand_equivalence(g, rules) == 0);

    auto none = from_text("a\tb\tc\n");
    CHECK(expand_equivalence(none, rules) == 0);

    std::istringstream bad("{\"rules\": [{\"if\": {}}]}");
    CHECK_THROWS_AS(read_equivalence_rules(bad), FormatError);
}

TEST_CASE("entity types") {
    auto g = from_text("microsoft\twas_founded_by\tbill_gates\n");
    const std::vector<TypeAssertion> types{{"microsoft", "organization"}, {"bill_gates", "person"}};
    CHECK(apply_entity_types(g, types) == 2);
    CHECK(has_edge(g, "microsoft", "is_a", "organization"));
    CHECK(has_edge(g, "bill_gates", "is_a", "person"));
    CHECK(apply_entity_types(g, std::vector<TypeAssertion>{}) == 0);
    CHECK_THROWS_AS(apply_entity_types(g, std::vector<TypeAssertion>{{"microsoft", "spaceship"}}), ValidationError);
}

TEST_CASE("fixture hierarchy queries") {
    auto g = pipeline::build_kg(testing::fixture_inputs());
    CHECK(superclasses(g, "sparql") == std::vector<std::string>{"rdf_query_language", "query_language"});
    CHECK(superclasses(g, "subgraph_extraction").empty());
    CHECK(as_set(superclasses(g, "object-oriented_programming_language")).count("programming_language") == 1);
    CHECK(as_set(subclasses(g, "graph_database")) == std::set<std::string>{"allegrograph", "neo4j", "virtuoso"});
    CHECK(subclasses(g, "neo4j").empty());
    CHECK(as_set(subclasses(g, "query_language")) == oracle::closure(g, "query_language", false));
    CHECK(as_set(subclasses(g, "query_language")).count("sparql") == 1);
    CHECK_THROWS_AS(superclasses(g, "nothing_here"), NotFoundError);
    CHECK(is_a_acyclic(g));
}

TEST_CASE("closures agree with brute-force reachability") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 10; ++i) {
        const auto rg = oracle::random_graph(rng, 200, 400);
        const auto g = rg.build();
        CHECK(is_a_acyclic(g));
        for (const auto& e : g.entities()) {
            CHECK(as_set(superclasses(g, e.id)) == oracle::closure(g, e.id, true));
            CHECK(as_set(subclasses(g, e.id)) == oracle::closure(g, e.id, false));
        }
    }
}

TEST_CASE("entity linking") {
    auto g = pipeline::build_kg(testing::fixture_inputs());
    CHECK(link_entity(g, phrase({{"graph", "graph"}, {"databases", "database"}})) == "graph_database");
    CHECK(link_entity(g, phrase({{"Python", "Python"}})) == "python");
    CHECK(link_entity(g, phrase({{"mpmjs", "mpmjs"}})) == "npm");
    try {
        link_entity(g, phrase({{"quantum", "quantum"}, {"teleporter", "teleporter"}}));
        FAIL("expected a link failure");
    } catch (const LinkFailure& e) {
        CHECK(e.phrase() == "quantum_teleporter");
    }
    for (const auto& e : g.entities()) {
        const auto words = words_of(e.id);
        CHECK(link_entity(g, words) == e.id);
    }
}

TEST_CASE("snapshot round trip") {
    auto g = pipeline::build_kg(testing::fixture_inputs());
    std::stringstream buf;
    save_snapshot(g, buf);
    const std::string text = buf.str();
    std::istringstream in(text);
    auto back = load_snapshot(in);
    REQUIRE(back.entity_count() == g.entity_count());
    REQUIRE(back.edge_count() == g.edge_count());
    for (std::size_t i = 0; i < g.entity_count(); ++i) {
        CHECK(back.entities()[i].id == g.entities()[i].id);
        CHECK(back.entities()[i].aliases == g.entities()[i].aliases);
    }
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
        CHECK(back.edges()[i].source == g.edges()[i].source);
        CHECK(back.edges()[i].predicate == g.edges()[i].predicate);
        CHECK(back.edges()[i].target == g.edges()[i].target);
        CHECK(back.edges()[i].weight == g.edges()[i].weight);
    }
    CHECK(back.synonym_map() == g.synonym_map());

    std::stringstream empty_buf;
    save_snapshot(KnowledgeGraph{}, empty_buf);
    CHECK(load_snapshot(empty_buf).entity_count() == 0);

    std::istringstream truncated(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_snapshot(truncated), FormatError);
    std::istringstream garbage("not a snapshot");
    CHECK_THROWS_AS(load_snapshot(garbage), FormatError);
}

TEST_CASE("frozen graphs reject writes") {
    auto g = from_text("a\tb\tc\n");
    g.freeze();
    CHECK_THROWS(g.add_edge("a", "b", "d"));
}
