#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "kgqa/chunking.hpp"

using namespace kgqa;
using namespace kgqa::chunking;

namespace {

const ParsingExpression& expr(ChunkKind kind) {
    for (const auto& e : default_grammar())
        if (e.kind() == kind) return e;
    throw std::logic_error("kind missing from grammar");
}

std::optional<std::size_t> match(ChunkKind kind, std::vector<std::string> tags) {
    return expr(kind).longest_match(tags);
}

annotation::AnnotatedQuery tagged(const std::vector<std::pair<std::string, std::string>>& words) {
    annotation::AnnotatedQuery q;
    int i = 1;
    for (const auto& [form, pos] : words) {
        annotation::Token t;
        t.index = i;
        t.form = form;
        t.lemma = form;
        t.pos = pos;
        t.head = i == 1 ? 0 : 1;
        t.deprel = i == 1 ? "root" : "dep";
        q.tokens.push_back(t);
        ++i;
    }
    return q;
}

const Chunk* find(const std::vector<Chunk>& chunks, ChunkKind kind, const std::string& text) {
    for (const auto& c : chunks)
        if (c.kind == kind && c.text == text) return &c;
    return nullptr;
}

} // namespace

TEST_CASE("default expressions") {
    CHECK(match(ChunkKind::WHNP, {"WDT", "NN", "NNS"}) == 3u);
    CHECK_FALSE(match(ChunkKind::VP, {"NN"}));
    CHECK(match(ChunkKind::NP, {"DT", "JJ", "NN"}) == 3u);
    CHECK(match(ChunkKind::WHVP, {"WP", "VBD", "NNP"}) == 2u);
    CHECK(match(ChunkKind::INNP, {"IN", "DT", "NNP", "NN", "NNS"}) == 5u);
}

TEST_CASE("compiling expressions") {
    auto e = ParsingExpression::compile(ChunkKind::NP, "(DT)? (NN.*)+");
    CHECK(e.longest_match(std::vector<std::string>{"NNS", "NNP", "VB"}) == 2u);
    CHECK(e.longest_match(std::vector<std::string>{"VB", "NN"}, 1) == 1u);
    CHECK_FALSE(e.longest_match(std::vector<std::string>{"DT"}));

    auto joined = ParsingExpression::compile(ChunkKind::NP, "(DT)?-\n(NN)+");
    CHECK(joined.longest_match(std::vector<std::string>{"DT", "NN"}) == 2u);

    CHECK_THROWS_AS(ParsingExpression::compile(ChunkKind::NP, "(NN"), PatternError);
    CHECK_THROWS_AS(ParsingExpression::compile(ChunkKind::NP, "(NN)*"), PatternError);
    CHECK_THROWS_AS(ParsingExpression::compile(ChunkKind::NP, "NN)+"), PatternError);
    try {
        ParsingExpression::compile(ChunkKind::NP, "(NN|)+");
    } catch (const PatternError& err) {
        CHECK(err.position() > 0);
    }
}

TEST_CASE("sample query chunks") {
    const auto chunks = chunk(testing::load_query("sample_query"));
    const auto* whnp = find(chunks, ChunkKind::WHNP, "Which graph databases");
    REQUIRE(whnp);
    REQUIRE(whnp->inner);
    CHECK(*whnp->inner == Span{2, 3});
    CHECK(find(chunks, ChunkKind::VP, "support"));
    CHECK(find(chunks, ChunkKind::NP, "Python"));

    ChunkIndex idx(chunks);
    CHECK(idx.count(ChunkKind::WHNP) == 1);
    CHECK(idx.count(ChunkKind::NP) + idx.count(ChunkKind::INNP) >= 2);
    CHECK(idx.word(ChunkKind::WHNP, 1, 2) == 2);
    CHECK_THROWS(idx.word(ChunkKind::WHNP, 1, 9));
    CHECK_THROWS(idx.at(ChunkKind::WHVP, 1));
    CHECK(idx.count(ChunkKind::WHVP) == 0);
}

TEST_CASE("list query chunks") {
    const auto chunks = chunk(testing::load_query("list_graph_database"));
    for (const auto& c : chunks) {
        CHECK(c.kind != ChunkKind::WHNP);
        CHECK(c.kind != ChunkKind::WHVP);
    }
    CHECK(find(chunks, ChunkKind::NP, "graph database"));
}

TEST_CASE("punctuation only") {
    CHECK(chunk(tagged({{"?", "."}, {"!", "."}})).empty());
}

TEST_CASE("chunkings are ordered, disjoint and deterministic") {
    const std::vector<std::string> tags{"WDT", "WP",  "WRB", "NN", "NNS", "NNP", "VB", "VBZ",
                                        "VBD", "MD",  "IN",  "DT", "JJ",  "CD",  "RB", "."};
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> pick(0, tags.size() - 1);
    std::uniform_int_distribution<int> len(1, 12);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::pair<std::string, std::string>> words;
        const int n = len(rng);
        for (int k = 0; k < n; ++k) words.emplace_back("w" + std::to_string(k), tags[pick(rng)]);
        const auto q = tagged(words);
        const auto chunks = chunk(q);
        int last = 0;
        for (const auto& c : chunks) {
            CHECK(c.span.start > last);
            CHECK(c.span.end >= c.span.start);
            CHECK(c.span.end <= n);
            last = c.span.end;
        }
        const auto again = chunk(q);
        REQUIRE(again.size() == chunks.size());
        for (std::size_t k = 0; k < chunks.size(); ++k) CHECK(again[k].span == chunks[k].span);

        std::vector<std::string> seq;
        for (const auto& t : q.tokens) seq.push_back(t.pos);
        if (expr(ChunkKind::WHNP).longest_match(seq)) {
            REQUIRE_FALSE(chunks.empty());
            CHECK(chunks.front().kind == ChunkKind::WHNP);
        }
    }
}

TEST_CASE("grammar from a file") {
    std::ifstream in(testing::data_path("fixtures/grammar/simple.grammar"));
    const auto g = load_grammar(in);
    CHECK(g.size() == 5);
    const auto chunks = chunk(testing::load_query("sample_query"), g);
    CHECK(find(chunks, ChunkKind::WHNP, "Which graph databases"));
    CHECK(find(chunks, ChunkKind::INNP, "through the RDF query languages"));

    std::istringstream bad("XP: (NN)+\n");
    CHECK_THROWS(load_grammar(bad));
    std::istringstream dangling("NP: (NN)+-\n");
    CHECK_THROWS(load_grammar(dangling));
}
