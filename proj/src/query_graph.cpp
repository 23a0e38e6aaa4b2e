#include "kgqa/query_graph.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "kgqa/error.hpp"

namespace kgqa::qg {

using annotation::AnnotatedQuery;
using annotation::ArcPair;
using annotation::PairPattern;
using chunking::Chunk;
using chunking::ChunkIndex;
using chunking::ChunkKind;
using chunking::Span;

std::string_view wildcard_name(Wildcard w) noexcept {
    switch (w) {
    case Wildcard::none: return "";
    case Wildcard::person: return "PERSON";
    case Wildcard::date: return "DATE";
    case Wildcard::any_entity: return "ANYENTITY";
    case Wildcard::any_relation: return "ANYRELATION";
    }
    return "";
}

namespace {

std::optional<Wildcard> parse_wildcard(std::string_view s) {
    for (auto w : {Wildcard::person, Wildcard::date, Wildcard::any_entity, Wildcard::any_relation})
        if (wildcard_name(w) == s) return w;
    return std::nullopt;
}

bool is_determiner(std::string_view pos) {
    return pos == "DT" || pos == "PDT" || pos == "WDT" || pos == "POS";
}

bool is_wh_tag(std::string_view pos) {
    return pos == "WDT" || pos == "WP" || pos == "WP$" || pos == "WRB";
}

// Phrase over a token range; leading determiners (and, for INNP, the preposition) dropped.
Term phrase(const AnnotatedQuery& q, Span span, bool drop_preposition = false) {
    Term t;
    int i = span.start;
    if (drop_preposition)
        while (i <= span.end && (q.token(i).pos == "IN" || q.token(i).pos == "TO")) ++i;
    while (i < span.end && is_determiner(q.token(i).pos)) ++i;
    for (; i <= span.end; ++i) {
        t.words.push_back(q.token(i).word());
        t.tokens.push_back(i);
    }
    return t;
}

Term chunk_phrase(const AnnotatedQuery& q, const Chunk& c) {
    return phrase(q, c.span, c.kind == ChunkKind::INNP);
}

std::string key_of(const ConstraintQuad& quad) {
    return quad.category.text() + "\x1f" + quad.predicate.text() + "\x1f" + quad.property.text();
}

bool is_aux(const annotation::Token& t) {
    auto lemma = to_lower(t.lemma);
    return t.pos == "MD" || lemma == "be" || lemma == "do" || lemma == "have";
}

class Builder {
public:
    Builder(const AnnotatedQuery& q, const std::vector<Chunk>& chunks)
        : q_(q), chunks_(chunks), index_(chunks) {}

    QueryGraph run() {
        const auto m = index_.count(ChunkKind::WHNP);
        const auto n = index_.count(ChunkKind::WHVP);
        if (m > 0 && n > 0) fail("query has both an interrogative noun phrase and verb phrase");

        const Chunk* first = nullptr;
        if (!chunks_.empty() && chunks_.front().span.start == 1) first = &chunks_.front();

        if (first && first->kind == ChunkKind::WHNP) {
            if (m != 1) fail("more than one interrogative noun phrase");
            pattern1(*first);
            if (out_.quads.empty()) fail("no subject/object dependency pair around the question focus");
            pattern2();
        } else if (first && first->kind == ChunkKind::WHVP) {
            whvp(*first);
        } else if (q_.size() > 0 && to_lower(q_.token(1).form) == "list" && m == 0 && n == 0) {
            pattern5();
        } else {
            fail("no extraction pattern applies");
        }
        return std::move(out_);
    }

private:
    [[noreturn]] void fail(const std::string& reason) const {
        throw UnsupportedQuery(reason, chunking::describe(chunks_));
    }

    bool in_kind(int token, std::initializer_list<ChunkKind> kinds) const {
        for (auto k : kinds)
            if (index_.containing(k, token)) return true;
        return false;
    }

    const Chunk* object_chunk(int token) const {
        if (auto* c = index_.containing(ChunkKind::NP, token)) return c;
        return index_.containing(ChunkKind::INNP, token);
    }

    bool add(ConstraintQuad quad, int pattern) {
        if (!seen_.insert(key_of(quad)).second) return false;
        out_.quads.push_back({std::move(quad), pattern});
        return true;
    }

    // Subject/object pairs whose first dependent satisfies `subject`; sorted by position.
    std::vector<ArcPair> pairs(const annotation::TokenFilter& subject) const {
        std::vector<ArcPair> found;
        for (const char* s : {"nsubj", "nsubjpass"}) {
            for (const char* o : {"dobj", "nmod"}) {
                PairPattern p{s, o, subject,
                              [&](int g) { return index_.containing(ChunkKind::VP, g) != nullptr; },
                              [&](int d) { return object_chunk(d) != nullptr && !subject(d); }};
                auto r = annotation::find_dependency_pairs(q_, p);
                found.insert(found.end(), r.begin(), r.end());
            }
        }
        std::stable_sort(found.begin(), found.end(), [](const ArcPair& a, const ArcPair& b) {
            if (a.first.governor != b.first.governor) return a.first.governor < b.first.governor;
            return a.second.dependent < b.second.dependent;
        });
        return found;
    }

    void pattern1(const Chunk& whnp) {
        if (!whnp.inner) fail("interrogative noun phrase has no noun");
        const Span inner = *whnp.inner;
        Term category = phrase(q_, inner);
        for (const auto& [a, b] : pairs([inner](int d) { return inner.contains(d); })) {
            const Chunk* vp = index_.containing(ChunkKind::VP, a.governor);
            ConstraintQuad quad{category, chunk_phrase(q_, *vp), chunk_phrase(q_, *object_chunk(b.dependent)), 1};
            add(std::move(quad), 1);
        }
    }

    void pattern2() {
        for (std::size_t i = 0; i < out_.quads.size(); ++i) {
            const Term outer = out_.quads[i].quad.property;
            const int layer = out_.quads[i].quad.layer;
            if (outer.tokens.empty()) continue;
            std::set<int> tokens(outer.tokens.begin(), outer.tokens.end());
            for (const auto& [a, b] : pairs([&tokens](int d) { return tokens.count(d) > 0; })) {
                const Chunk* vp = index_.containing(ChunkKind::VP, a.governor);
                ConstraintQuad quad{outer, chunk_phrase(q_, *vp), chunk_phrase(q_, *object_chunk(b.dependent)),
                                    layer + 1};
                add(std::move(quad), 2);
            }
        }
    }

    void whvp(const Chunk& c) {
        if (!c.inner) fail("interrogative verb phrase has no verb");
        const std::string wh = to_lower(q_.token(1).form);
        bool copula = false;
        for (int i = c.inner->start; i <= c.inner->end; ++i) {
            if (is_verb_tag(q_.token(i).pos)) {
                copula = to_lower(q_.token(i).lemma) == "be";
                break;
            }
        }
        if (wh == "when") {
            pattern3(c, Wildcard::date);
        } else if (copula) {
            pattern4(c);
        } else if (wh == "who") {
            pattern3(c, Wildcard::person);
        } else if (wh == "what") {
            pattern3(c, Wildcard::any_entity);
        } else {
            fail("unsupported interrogative word '" + wh + "'");
        }
    }

    const Chunk* next_noun_chunk(int after) const {
        for (const auto& ch : chunks_)
            if (ch.span.start > after && (ch.kind == ChunkKind::NP || ch.kind == ChunkKind::INNP)) return &ch;
        return nullptr;
    }

    void pattern3(const Chunk& c, Wildcard category) {
        // Predicate: the inner verb group unless it is only auxiliaries, else the root's VP.
        Span pred_span = *c.inner;
        bool content = false;
        for (int i = pred_span.start; i <= pred_span.end; ++i)
            if (is_verb_tag(q_.token(i).pos) && !is_aux(q_.token(i))) content = true;
        if (!content) {
            int root = 0;
            for (const auto& t : q_.tokens)
                if (t.head == 0) root = t.index;
            const Chunk* vp = root > 0 ? index_.containing(ChunkKind::VP, root) : nullptr;
            if (vp) pred_span = vp->span;
        }
        std::set<int> pred_tokens;
        for (int i = pred_span.start; i <= pred_span.end; ++i) pred_tokens.insert(i);

        const Chunk* prop = nullptr;
        for (const auto& arc : annotation::arcs(q_)) {
            if (!pred_tokens.count(arc.governor) || c.span.contains(arc.dependent)) continue;
            bool rel = false;
            for (const char* r : {"dobj", "nmod", "nsubjpass", "nsubj"})
                rel = rel || annotation::deprel_matches(arc.deprel, r);
            if (!rel) continue;
            if (const Chunk* ch = object_chunk(arc.dependent)) {
                prop = ch;
                break;
            }
        }
        if (!prop) prop = next_noun_chunk(c.span.end);
        if (!prop) fail("no property phrase after the interrogative verb phrase");

        Term predicate = phrase(q_, pred_span);
        // The wh-word itself never belongs to the predicate.
        while (!predicate.tokens.empty() && is_wh_tag(predicate.words.front().pos)) {
            predicate.tokens.erase(predicate.tokens.begin());
            predicate.words.erase(predicate.words.begin());
        }
        add({Term::of_wildcard(category), std::move(predicate), chunk_phrase(q_, *prop), 1}, 3);
        pattern2();
    }

    void pattern4(const Chunk& c) {
        const Chunk* x = next_noun_chunk(c.span.end);
        if (!x) fail("definition query without a subject phrase");
        Term subject = chunk_phrase(q_, *x);
        add({Term::of_wildcard(Wildcard::any_entity), Term::of_wildcard(Wildcard::any_relation), subject, 1}, 4);
        add({subject, Term::of_wildcard(Wildcard::any_relation), Term::of_wildcard(Wildcard::any_entity), 1}, 4);
    }

    void pattern5() {
        const Chunk* np = nullptr;
        std::optional<Span> span;
        for (const auto& ch : chunks_) {
            Span s = ch.span;
            if (s.start == 1) {
                if (s.length() == 1) continue;
                s.start = 2;
            }
            if (ch.kind != ChunkKind::NP || np) fail("listing query must name exactly one noun phrase");
            np = &ch;
            span = s;
        }
        if (!np) fail("listing query without a noun phrase");
        add({phrase(q_, *span), Term::of_wildcard(Wildcard::any_relation), Term::of_wildcard(Wildcard::any_entity),
             1},
            5);
    }

    const AnnotatedQuery& q_;
    const std::vector<Chunk>& chunks_;
    ChunkIndex index_;
    QueryGraph out_;
    std::set<std::string> seen_;
};

} // namespace

Term Term::of_wildcard(Wildcard w) {
    Term t;
    t.wildcard = w;
    return t;
}

Term Term::of_entity(std::string id) {
    Term t;
    t.entity = std::move(id);
    return t;
}

std::string Term::text() const {
    if (is_wildcard()) return std::string(wildcard_name(wildcard));
    if (entity) return *entity;
    std::vector<std::string> forms;
    for (const auto& w : words) forms.push_back(w.form);
    return join(forms, "_");
}

std::string ConstraintQuad::to_string() const {
    return "(" + category.text() + ", " + predicate.text() + ", " + property.text() + ", " +
           std::to_string(layer) + ")";
}

int QueryGraph::max_layer() const noexcept {
    int m = 0;
    for (const auto& r : quads) m = std::max(m, r.quad.layer);
    return m;
}

bool QueryGraph::is_definition() const noexcept {
    return !quads.empty() && std::all_of(quads.begin(), quads.end(), [](const QuadRecord& r) { return r.pattern == 4; });
}

QueryGraph build_query_graph(const AnnotatedQuery& q, const std::vector<Chunk>& chunks) {
    return Builder(q, chunks).run();
}

std::vector<QuadRecord> solving_order(const QueryGraph& qg, std::optional<std::uint64_t> seed) {
    std::map<int, std::vector<QuadRecord>, std::greater<>> layers;
    for (const auto& r : qg.quads) layers[r.quad.layer].push_back(r);
    std::vector<QuadRecord> order;
    std::optional<std::mt19937_64> rng;
    if (seed) rng.emplace(*seed);
    for (auto& [layer, quads] : layers) {
        if (rng) std::shuffle(quads.begin(), quads.end(), *rng);
        order.insert(order.end(), quads.begin(), quads.end());
    }
    return order;
}

std::optional<std::string> check_invariants(const QueryGraph& qg) {
    if (qg.quads.empty()) return "empty query graph";
    std::map<int, std::vector<const ConstraintQuad*>> layers;
    for (const auto& r : qg.quads) {
        if (r.quad.layer < 1) return "layer below 1 in " + r.quad.to_string();
        layers[r.quad.layer].push_back(&r.quad);
    }
    for (int c = 1; c <= qg.max_layer(); ++c)
        if (!layers.count(c)) return "missing layer " + std::to_string(c);
    for (int c = 2; c <= qg.max_layer(); ++c) {
        for (const auto* inner : layers[c]) {
            bool chained = std::any_of(layers[c - 1].begin(), layers[c - 1].end(), [&](const ConstraintQuad* outer) {
                return outer->property.text() == inner->category.text();
            });
            if (!chained) return "quad " + inner->to_string() + " has no outer quad to chain from";
        }
    }
    return std::nullopt;
}

std::string serialize(const QueryGraph& qg) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : qg.quads) {
        out.push_back({{"category", r.quad.category.text()},
                       {"predicate", r.quad.predicate.text()},
                       {"property", r.quad.property.text()},
                       {"layer", r.quad.layer},
                       {"pattern", r.pattern}});
    }
    return out.dump(2);
}

namespace {

Term term_from_text(const std::string& s) {
    if (auto w = parse_wildcard(s)) return Term::of_wildcard(*w);
    Term t;
    for (const auto& part : split(s, '_')) t.words.push_back(Word{part, part, ""});
    return t;
}

} // namespace

QueryGraph parse_query_graph(std::string_view json) {
    QueryGraph qg;
    try {
        auto doc = nlohmann::json::parse(json);
        if (!doc.is_array()) throw FormatError("query graph must be a JSON array");
        for (const auto& rec : doc) {
            QuadRecord r;
            r.quad.category = term_from_text(rec.at("category").get<std::string>());
            r.quad.predicate = term_from_text(rec.at("predicate").get<std::string>());
            r.quad.property = term_from_text(rec.at("property").get<std::string>());
            r.quad.layer = rec.at("layer").get<int>();
            r.pattern = rec.value("pattern", 0);
            qg.quads.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("query graph: ") + e.what());
    }
    return qg;
}

} // namespace kgqa::qg
