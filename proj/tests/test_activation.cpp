#include <doctest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "kgqa/activation.hpp"
#include "kgqa/error.hpp"
#include "oracles.hpp"

using namespace kgqa;
using activation::ActivationParams;

namespace {

const kg::KnowledgeGraph& fixture_kg() {
    static const kg::KnowledgeGraph g = [] {
        auto k = pipeline::build_kg(testing::fixture_inputs());
        k.freeze();
        return k;
    }();
    return g;
}

std::set<std::string> keys(const std::map<std::string, double>& m) {
    std::set<std::string> out;
    for (const auto& [k, v] : m) out.insert(k);
    return out;
}

} // namespace

TEST_CASE("update rule branches") {
    const double at = 0.8;
    const double t1 = activation::propagate(0.2, 0.9, 0.9, 0.85);
    CHECK(t1 == doctest::Approx(0.8885).epsilon(1e-12));
    CHECK(activation::adjust(0.2, t1, at) == t1);

    const double t2 = activation::propagate(0.5, 1.0, 1.0, 0.85);
    CHECK(t2 == doctest::Approx(1.35).epsilon(1e-12));
    CHECK(activation::adjust(0.5, t2, at) == 1.0);

    const double t3 = activation::propagate(0.0, 0.9, 0.1, 0.85);
    CHECK(t3 == doctest::Approx(0.0765).epsilon(1e-12));
    CHECK(activation::adjust(0.0, t3, at) == 0.0);
}

TEST_CASE("update rule stays in bounds and never decreases") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double a_j = u(rng), a_i = u(rng), w = u(rng);
        const double df = 0.01 + 0.98 * u(rng), at = 0.01 + 0.98 * u(rng);
        const double temp = activation::propagate(a_j, a_i, w, df);
        const double out = activation::adjust(a_j, temp, at);
        CHECK(out >= a_j);
        CHECK(out >= 0.0);
        CHECK(out <= 1.0);
    }
}

TEST_CASE("parameter validation") {
    ActivationParams p;
    CHECK_NOTHROW(p.validate());
    p.active_threshold = 1.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {};
    p.seed_activation = 0.5;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {};
    p.max_iterations = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("fixture subgraph for graph databases supporting python") {
    const auto& g = fixture_kg();
    const auto r = activation::subgraph_search(g, "graph_database", "python", ActivationParams{});
    const auto subj = keys(r.sg_subj);
    for (const char* id : {"graph_database", "neo4j", "virtuoso", "allegrograph"}) CHECK(subj.count(id) == 1);
    bool found = false;
    for (const auto& c : r.cr)
        if (c.subj_side_node == "virtuoso" && c.predicate == "support" && c.obj_side_node == "python") found = true;
    CHECK(found);
    for (const auto& c : r.cr) {
        CHECK(r.sg_subj.count(c.subj_side_node) == 1);
        CHECK(r.sg_obj.count(c.obj_side_node) == 1);
        const auto& e = g.edge(c.edge);
        const bool joins = (e.source == c.subj_side_node && e.target == c.obj_side_node) ||
                           (e.source == c.obj_side_node && e.target == c.subj_side_node);
        CHECK(joins);
    }
}

TEST_CASE("isolated subject spreads nowhere") {
    kg::KnowledgeGraph g;
    g.ensure_entity("alone");
    g.add_edge("x", "rel", "y");
    const auto r = activation::subgraph_search(g, "alone", "x", ActivationParams{});
    CHECK(keys(r.sg_subj) == std::set<std::string>{"alone"});
    CHECK(r.cr.empty());
}

TEST_CASE("same node on both sides only records adjacent edges") {
    kg::KnowledgeGraph g;
    g.add_edge("a", "rel", "b");
    g.add_edge("b", "rel", "c");
    const auto r = activation::subgraph_search(g, "a", "a", ActivationParams{});
    for (const auto& c : r.cr) CHECK(c.obj_side_node == "a");
    CHECK(keys(r.sg_obj) == std::set<std::string>{"a"});
}

TEST_CASE("spreading terminates within the round bound") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 20; ++i) {
        auto rg = oracle::random_graph(rng);
        const auto g = rg.build();
        auto state = activation::ActivationState::seeded(g, 0, rg.params);
        std::vector<double> prev = state.activation;
        while (!state.frontier.empty() && state.iteration < rg.params.max_iterations) {
            state = activation::spread_step(state, g, rg.params);
            for (std::size_t k = 0; k < prev.size(); ++k) {
                CHECK(state.activation[k] >= prev[k]);
                CHECK(state.activation[k] <= 1.0);
            }
            prev = state.activation;
        }
        const auto full = activation::spread(g, 0, rg.params);
        CHECK(full.iteration <= rg.params.max_iterations);
    }
}

TEST_CASE("random graphs agree with the naive simulator") {
    std::mt19937_64 rng(2024);
    int nontrivial = 0;
    for (int i = 0; i < 20; ++i) {
        const auto rg = oracle::random_graph(rng);
        std::uniform_int_distribution<int> pick(0, rg.nodes - 1);
        const int s = pick(rng), o = pick(rng);
        CAPTURE(i);
        CHECK(oracle::compare_with_naive(rg, s, o) == "");
        const auto g = rg.build();
        const auto r = activation::subgraph_search(g, oracle::RandomGraph::id(s), oracle::RandomGraph::id(o), rg.params);
        if (r.sg_subj.size() > 1 && !r.cr.empty()) ++nontrivial;
    }
    CHECK(nontrivial >= 5);
}

TEST_CASE("candidate answers are the deepest subclasses") {
    const auto& g = fixture_kg();
    const auto r = activation::subgraph_search(g, "graph_database", "python", ActivationParams{});
    CHECK(activation::candidate_answers(r, g, "graph_database") ==
          std::vector<std::string>{"allegrograph", "neo4j", "virtuoso"});

    kg::KnowledgeGraph leaf;
    leaf.add_edge("thing", "rel", "other");
    const auto r2 = activation::subgraph_search(leaf, "thing", "other", ActivationParams{});
    CHECK(activation::candidate_answers(r2, leaf, "thing") == std::vector<std::string>{"thing"});

    kg::KnowledgeGraph chain;
    chain.add_edge("b", "is_a", "a");
    chain.add_edge("c", "is_a", "b");
    const std::map<std::string, double> sg{{"a", 1.0}, {"b", 0.9}, {"c", 0.85}};
    CHECK(activation::candidate_answers(sg, chain, "a") == std::vector<std::string>{"c"});

    CHECK(activation::candidate_answers(sg, chain, "missing").empty());
}

TEST_CASE("quad overload links terms and reports failures") {
    const auto& g = fixture_kg();
    auto q = testing::load_query("unknown_entity");
    auto graph = qg::build_query_graph(q, chunking::chunk(q));
    REQUIRE_FALSE(graph.quads.empty());
    CHECK_THROWS_AS(activation::subgraph_search(g, graph.quads[0].quad, ActivationParams{}), LinkFailure);
}
