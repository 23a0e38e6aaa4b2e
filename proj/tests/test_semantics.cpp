#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "kgqa/error.hpp"
#include "kgqa/semantics.hpp"

using namespace kgqa;
using namespace kgqa::semantics;

namespace {

EmbeddingStore small_store() {
    std::istringstream in("support 1 0 0 0\nrun 0 1 0 0\non 0 1 0 0\n");
    return load_embeddings(in);
}

} // namespace

TEST_CASE("loading vector files") {
    auto s = small_store();
    CHECK(s.size() == 3);
    CHECK(s.dimension() == 4);

    std::istringstream with_header("3 4\nsupport 1 0 0 0\nrun 0 1 0 0\non 0 1 0 0\n");
    CHECK(load_embeddings(with_header).size() == 3);

    std::istringstream short_row("support 1 0 0 0\nrun 0 1 0\n");
    try {
        load_embeddings(short_row);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    std::istringstream dup("Support 1 0 0 0\nsupport 0 1 0 0\n");
    auto d = load_embeddings(dup);
    CHECK(d.size() == 1);
    CHECK((*d.find("support"))[0] == 1.0);
}

TEST_CASE("phrase vectors") {
    auto s = small_store();
    auto v = phrase_vector(s, "support");
    REQUIRE(v);
    CHECK(*v == *s.find("support"));
    CHECK_FALSE(phrase_vector(s, "is_available_for"));

    auto fixture = load_embeddings(testing::data_path("fixtures/kg/embeddings.txt"));
    auto m = phrase_vector(fixture, "can_be_accessed_through");
    REQUIRE(m);
    CHECK((*m)[0] == doctest::Approx(0.0));
    CHECK((*m)[1] == doctest::Approx(0.0));
    CHECK((*m)[2] == doctest::Approx(0.625));
    CHECK((*m)[3] == doctest::Approx(0.375));

    CHECK(phrase_tokens("Can_Be accessed") == std::vector<std::string>{"can", "be", "accessed"});
}

TEST_CASE("predicate similarity examples") {
    auto s = small_store();
    CHECK(predicate_similarity(s, "support", "support") == 1.0);
    CHECK(predicate_similarity(s, "support", "run_on") == 0.0);
    CHECK(predicate_similarity(s, "is_available_for", "run_on") == 0.0);
    CHECK(predicate_similarity(s, "is_available_for", "is_available_for") == 1.0);
    CHECK(predicate_similarity(s, "run_on", "run") == doctest::Approx(1.0));
}

TEST_CASE("similarity is symmetric and bounded") {
    auto fixture = load_embeddings(testing::data_path("fixtures/kg/embeddings.txt"));
    const std::vector<std::string> ps{"support", "run_on", "can_be_accessed_through", "released_in",
                                      "is_written_in", "created", "does_not_support"};
    for (const auto& a : ps)
        for (const auto& b : ps) {
            const double x = predicate_similarity(fixture, a, b);
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
            CHECK(x == doctest::Approx(predicate_similarity(fixture, b, a)).epsilon(1e-12));
        }
    for (const auto& a : ps) CHECK(predicate_similarity(fixture, a, a) == doctest::Approx(1.0));
}

TEST_CASE("negative predicates") {
    CHECK(is_negative_predicate("does_not_support"));
    CHECK_FALSE(is_negative_predicate("support"));
    CHECK(is_negative_predicate("incompatible_with"));
    CHECK(is_negative_predicate("doesn't_support"));
    PolarityDetector custom({"lacks"});
    CHECK(custom.is_negative("lacks_support"));
    CHECK_FALSE(custom.is_negative("does_not_support"));
}
