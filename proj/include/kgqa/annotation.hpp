#pragma once

#include <chrono>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgqa/text.hpp"

namespace kgqa::annotation {

struct Token {
    int index = 0;
    std::string form;
    std::string lemma;
    std::string pos;   // Penn Treebank tag
    int head = 0;      // 0 = root
    std::string deprel;
    /// Additional (head, deprel) arcs from an enhanced representation, excluding the basic arc.
    std::vector<std::pair<int, std::string>> enhanced;

    Word word() const { return Word{form, lemma, pos}; }
    friend bool operator==(const Token&, const Token&) = default;
};

struct AnnotatedQuery {
    std::string raw_text;
    std::vector<Token> tokens;

    std::size_t size() const noexcept { return tokens.size(); }
    /// 1-based access.
    const Token& token(int index) const { return tokens.at(static_cast<std::size_t>(index - 1)); }

    friend bool operator==(const AnnotatedQuery&, const AnnotatedQuery&) = default;
};

struct DependencyArc {
    std::string deprel;
    int governor = 0;
    int dependent = 0;

    friend bool operator==(const DependencyArc&, const DependencyArc&) = default;
};

/// Reads one sentence in the CoNLL-U subset: ID FORM LEMMA POS HEAD DEPREL [DEPS], or the
/// full 10-column CoNLL-U layout (XPOS is used as POS, UPOS ignored).
AnnotatedQuery parse_annotated(std::string_view document);
AnnotatedQuery parse_annotated(std::istream& in);

/// Writes the 6-column subset (7 columns when enhanced arcs are present).
std::string serialize(const AnnotatedQuery& q);

/// Basic arcs plus enhanced arcs, deduplicated, in document order of the dependent.
std::vector<DependencyArc> arcs(const AnnotatedQuery& q);

/// `nmod:through` matches `nmod`; UD v2 labels obj / obl / nsubj:pass are read as
/// dobj / nmod / nsubjpass.
bool deprel_matches(std::string_view label, std::string_view pattern);

using TokenFilter = std::function<bool(int)>;

/// Two arcs sharing a governor: first(governor, d1) and second(governor, d2).
struct PairPattern {
    std::string first;
    std::string second;
    TokenFilter first_dependent;
    TokenFilter governor;
    TokenFilter second_dependent;
};

using ArcPair = std::pair<DependencyArc, DependencyArc>;

std::vector<ArcPair> find_dependency_pairs(const AnnotatedQuery& q, const PairPattern& pattern);

/// Converts a CoreNLP-style JSON response (tokens + basicDependencies, optional
/// enhancedPlusPlusDependencies) into an AnnotatedQuery.
AnnotatedQuery from_corenlp_json(std::string_view body, std::string_view raw_text);

/// Client for a CoreNLP-compatible annotation server.
class AnnotatorClient {
public:
    explicit AnnotatorClient(std::string endpoint,
                             std::chrono::seconds timeout = std::chrono::seconds(30));

    AnnotatedQuery annotate(std::string_view raw) const;
    const std::string& endpoint() const noexcept { return endpoint_; }

private:
    std::string endpoint_;
    std::chrono::seconds timeout_;
};

AnnotatedQuery fetch_annotation(const std::string& endpoint, std::string_view raw);

/// KGQA_ANNOTATOR_URL, when set and non-empty.
std::optional<std::string> annotator_url_from_env();

} // namespace kgqa::annotation
