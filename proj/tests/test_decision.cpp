#include <doctest.h>

#include <random>
#include <sstream>

#include "kgqa/decision.hpp"
#include "oracles.hpp"

using namespace kgqa;
using namespace kgqa::decision;

namespace {

EvidenceTag tag(EvidenceKind k, Polarity p, double sim) {
    EvidenceTag t;
    t.kind = k;
    t.polarity = p;
    t.pdict_sim = sim;
    return t;
}

kg::KnowledgeGraph tiny_kg() {
    kg::KnowledgeGraph g;
    g.add_edge("virtuoso", "is_a", "graph_database");
    g.add_edge("neo4j", "is_a", "graph_database");
    g.add_edge("sparql", "is_a", "rdf_query_language");
    g.add_edge("rdql", "is_a", "rdf_query_language");
    return g;
}

CrossoverRelation cr(std::string subj, std::string pred, std::string obj) {
    return CrossoverRelation{std::move(subj), std::move(pred), 0.95, std::move(obj), 0, true};
}

} // namespace

TEST_CASE("feature #2 divides the R2 similarity sum by m*n") {
    std::vector<EvidenceTag> tags{tag(EvidenceKind::R2, Polarity::positive, 1.0),
                                  tag(EvidenceKind::R2, Polarity::positive, 0.5)};
    CHECK(extract_features(tags, 2, 2).p_r2 == 0.375);
}

TEST_CASE("no evidence gives the zero vector") {
    CHECK(extract_features({}, 3, 0) == FeatureVector{});
}

TEST_CASE("feature #1 is the maximum positive R1 similarity") {
    std::vector<EvidenceTag> tags{tag(EvidenceKind::R1, Polarity::positive, 0.6),
                                  tag(EvidenceKind::R1, Polarity::positive, 0.9),
                                  tag(EvidenceKind::R1, Polarity::negative, 1.0)};
    auto f = extract_features(tags, 1, 0);
    CHECK(f.p_r1 == 0.9);
    CHECK(f.n_r1 == 1.0);
    CHECK(f.n_r2 == 0.0);
}

TEST_CASE("R2 evidence with an empty denominator is rejected") {
    std::vector<EvidenceTag> tags{tag(EvidenceKind::R2, Polarity::positive, 1.0)};
    CHECK_THROWS_AS(extract_features(tags, 0, 2), ValidationError);
}

TEST_CASE("classify_evidence separates R1, R2, negatives and unrelated edges") {
    auto g = tiny_kg();
    semantics::Semantics sem;
    std::vector<CrossoverRelation> rels{
        cr("virtuoso", "support", "rdf_query_language"),  // R1 on c_obj
        cr("graph_database", "support", "sparql"),        // R2 via superclass of candidate
        cr("virtuoso", "does_not_support", "rdql"),       // negative R2
        cr("neo4j", "support", "rdf_query_language"),     // sibling: ignored
    };
    Constraint c{"rdf_query_language", "support"};
    auto tags = classify_evidence("virtuoso", c, rels, g, sem);
    REQUIRE(tags.size() == 3);
    CHECK(tags[0].kind == EvidenceKind::R1);
    CHECK(tags[0].pdict_sim == 1.0);
    CHECK(tags[1].kind == EvidenceKind::R2);
    CHECK(tags[1].polarity == Polarity::positive);
    CHECK(tags[2].kind == EvidenceKind::R2);
    CHECK(tags[2].polarity == Polarity::negative);

    auto f = extract_features(tags, g, std::string("rdf_query_language"), 2);
    CHECK(f.p_r1 == 1.0);
    CHECK(f.p_r2 == doctest::Approx(1.0 / 4.0));
    CHECK(f.n_r2 == 1.0);
}

TEST_CASE("wildcard relation counts every edge as positive with similarity 1") {
    auto g = tiny_kg();
    semantics::Semantics sem;
    std::vector<CrossoverRelation> rels{cr("virtuoso", "does_not_support", "x")};
    g.ensure_entity("x");
    auto tags = classify_evidence("virtuoso", Constraint{}, rels, g, sem);
    REQUIRE(tags.size() == 1);
    CHECK(tags[0].polarity == Polarity::positive);
    CHECK(tags[0].pdict_sim == 1.0);
}

TEST_CASE("evaluate: confusion-based balanced accuracy and positive-class MSE") {
    std::vector<int> labels{1, 1, 0, 0};
    std::vector<Prediction> preds{{1, 0.9}, {0, 0.4}, {0, 0.1}, {0, 0.2}};
    auto m = metrics_from(labels, preds);
    CHECK(m.balanced_accuracy == 0.75);
    CHECK(m.confidence_mse == doctest::Approx((0.01 + 0.36) / 2).epsilon(1e-12));

    std::vector<int> one{1};
    std::vector<Prediction> p09{{1, 0.9}};
    CHECK(metrics_from(one, p09).confidence_mse == doctest::Approx(0.01).epsilon(1e-12));

    std::vector<Prediction> perfect{{1, 1.0}, {1, 1.0}, {0, 0.0}, {0, 0.0}};
    auto pm = metrics_from(labels, perfect);
    CHECK(pm.balanced_accuracy == 1.0);
    CHECK(pm.confidence_mse == 0.0);
    CHECK(pm.f1 == 1.0);

    auto all = metrics_from(labels, preds, MseMode::all);
    CHECK(all.confidence_mse == doctest::Approx((0.01 + 0.36 + 0.01 + 0.04) / 4));
}

TEST_CASE("evaluate is invariant under permutation") {
    auto data = generate_synthetic(200, 3);
    auto model = train(data, ModelKind::gaussian_bayes);
    auto a = evaluate(*model, data);
    std::mt19937_64 rng(5);
    std::shuffle(data.begin(), data.end(), rng);
    auto b = evaluate(*model, data);
    CHECK(a.balanced_accuracy == b.balanced_accuracy);
    CHECK(a.confidence_mse == doctest::Approx(b.confidence_mse).epsilon(1e-12));
}

TEST_CASE("training errors") {
    CHECK_THROWS_AS(train({}, ModelKind::mlp), Error);
    Dataset single{{{1, 0, 0, 0}, 1}, {{0.9, 0, 0, 0}, 1}};
    try {
        train(single, ModelKind::gaussian_bayes);
        FAIL("expected training error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::training);
    }
    FeedForward untrained(ModelKind::mlp, {4, 10, 20, 10, 1});
    try {
        untrained.predict({});
        FAIL("expected model-state error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::model_state);
    }
}

TEST_CASE("gaussian bayes falls back to the prior when likelihoods coincide") {
    GaussianBayes nb;
    nb.set_parameters({Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero()},
                      {Eigen::Vector4d::Ones(), Eigen::Vector4d::Ones()});
    for (double x : {0.0, 0.3, 1.0}) {
        auto p = nb.predict({x, x, 0, 1});
        CHECK(p.label == 1);
        CHECK(p.confidence == doctest::Approx(0.85));
    }
}

TEST_CASE("models separate the synthetic data") {
    auto [train_set, test_set] = split_dataset(generate_synthetic(1000, 7), 0.3, 11);
    for (auto kind : {ModelKind::mlp, ModelKind::logistic, ModelKind::gaussian_bayes}) {
        CAPTURE(model_kind_name(kind));
        auto model = train(train_set, kind);
        auto m = evaluate(*model, test_set);
        CHECK(m.balanced_accuracy >= 0.95);
        CHECK(m.confidence_mse <= 0.05);
        auto neg = model->predict({0, 0, 1, 1});
        auto pos = model->predict({1, 1, 0, 0});
        CHECK(neg.label == 0);
        CHECK(pos.label == 1);
        CHECK(pos.confidence > 0.9);
        MESSAGE(model_kind_name(kind), " BA=", m.balanced_accuracy, " MSE=", m.confidence_mse);
    }
}

TEST_CASE("model files round-trip predictions") {
    auto data = generate_synthetic(300, 1);
    for (auto kind : {ModelKind::mlp, ModelKind::logistic, ModelKind::gaussian_bayes}) {
        TrainOptions opt;
        opt.epochs = 20;
        auto model = train(data, kind, opt);
        std::stringstream ss;
        save_model(*model, ss);
        auto back = load_model(ss);
        CHECK(back->kind() == kind);
        for (std::size_t i = 0; i < 20; ++i) {
            auto a = model->predict(data[i].features);
            auto b = back->predict(data[i].features);
            CHECK(a.label == b.label);
            CHECK(a.confidence == doctest::Approx(b.confidence).epsilon(1e-12));
        }
    }
    std::stringstream bad("{\"format\":\"kgqa-decision-model\",\"version\":9}");
    CHECK_THROWS_AS(load_model(bad), FormatError);
    std::stringstream truncated("{\"format\":\"kgqa-decision");
    CHECK_THROWS_AS(load_model(truncated), FormatError);
}

TEST_CASE("dataset csv round-trip and header check") {
    auto data = generate_synthetic(10, 2);
    std::stringstream ss;
    write_dataset(data, ss);
    auto back = read_dataset(ss);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(back[i].features == data[i].features);
        CHECK(back[i].label == data[i].label);
    }
    std::stringstream bad("a,b,c\n1,2,3\n");
    CHECK_THROWS_AS(read_dataset(bad), ParseError);
    std::stringstream bad_label("p_r1,p_r2,n_r1,n_r2,label\n0,0,0,0,2\n");
    CHECK_THROWS_AS(read_dataset(bad_label), ParseError);
}

TEST_CASE("features match brute-force oracles on random evidence") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 100; ++i) {
        CAPTURE(i);
        CHECK(kgqa::oracle::random_feature_check(rng) == "");
    }
}

TEST_CASE("backpropagation matches central differences") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        CAPTURE(i);
        CHECK(kgqa::oracle::gradient_relative_error(rng) < 1e-4);
    }
}
