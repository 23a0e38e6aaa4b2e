#include "kgqa/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "kgqa/error.hpp"

namespace kgqa::annotation {

namespace {

int parse_int(const std::string& field, std::size_t line_no, std::string_view what) {
    int value = 0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(line_no, "invalid " + std::string(what) + " '" + field + "'");
    return value;
}

std::vector<std::pair<int, std::string>> parse_deps(const std::string& field, std::size_t line_no) {
    std::vector<std::pair<int, std::string>> deps;
    if (field == "_" || field.empty()) return deps;
    for (const auto& item : split(field, '|')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == item.size())
            throw ParseError(line_no, "malformed DEPS entry '" + item + "'");
        deps.emplace_back(parse_int(item.substr(0, colon), line_no, "DEPS head"),
                          item.substr(colon + 1));
    }
    return deps;
}

void validate_tree(const AnnotatedQuery& q, const std::vector<std::size_t>& lines) {
    const int n = static_cast<int>(q.tokens.size());
    int roots = 0;
    for (const auto& t : q.tokens) {
        const auto line = lines[static_cast<std::size_t>(t.index - 1)];
        if (t.head < 0 || t.head > n) throw ParseError(line, "head out of range");
        if (t.head == t.index) throw ParseError(line, "token is its own head");
        if (t.head == 0 && ++roots > 1) throw ParseError(line, "more than one root");
        for (const auto& [h, rel] : t.enhanced)
            if (h < 0 || h > n) throw ParseError(line, "enhanced head out of range");
    }
    if (roots == 0) throw ParseError(lines.back(), "no root token");
    for (const auto& t : q.tokens) {
        int steps = 0;
        for (int cur = t.index; cur != 0; cur = q.token(cur).head) {
            if (++steps > n)
                throw ParseError(lines[static_cast<std::size_t>(t.index - 1)],
                                 "dependency cycle: heads do not form a tree");
        }
    }
}

std::string normalize_label(std::string_view label) {
    std::string l(label);
    if (l == "obj") return "dobj";
    if (l == "nsubj:pass") return "nsubjpass";
    if (l == "obl") return "nmod";
    if (l.rfind("obl:", 0) == 0) return "nmod" + l.substr(3);
    return l;
}

} // namespace

AnnotatedQuery parse_annotated(std::string_view document) {
    std::istringstream in{std::string(document)};
    return parse_annotated(in);
}

AnnotatedQuery parse_annotated(std::istream& in) {
    AnnotatedQuery q;
    std::vector<std::size_t> token_lines;
    std::string line;
    std::size_t line_no = 0;
    bool sentence_closed = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
            if (!q.tokens.empty()) sentence_closed = true;
            continue;
        }
        if (line.front() == '#') {
            constexpr std::string_view key = "# text =";
            if (line.rfind(key, 0) == 0) q.raw_text = std::string(trim(line.substr(key.size())));
            continue;
        }
        if (sentence_closed) throw ParseError(line_no, "only single-sentence queries are accepted");

        const auto cols = split(line, '\t');
        if (cols.size() != 6 && cols.size() != 7 && cols.size() != 10)
            throw ParseError(line_no, "expected 6, 7 or 10 tab-separated columns, got " +
                                          std::to_string(cols.size()));
        if (cols[0].find_first_of("-.") != std::string::npos)
            throw ParseError(line_no, "multiword and empty-node lines are not supported");

        const bool full = cols.size() == 10;
        Token t;
        t.index = parse_int(cols[0], line_no, "token index");
        t.form = cols[1];
        t.lemma = cols[2];
        t.pos = full ? cols[4] : cols[3];
        t.head = parse_int(full ? cols[6] : cols[4], line_no, "head");
        t.deprel = full ? cols[7] : cols[5];
        const std::string deps = full ? cols[8] : (cols.size() == 7 ? cols[6] : "_");
        for (auto& d : parse_deps(deps, line_no))
            if (!(d.first == t.head && d.second == t.deprel)) t.enhanced.push_back(std::move(d));

        if (t.form.empty()) throw ParseError(line_no, "empty FORM");
        if (t.pos.empty() || t.pos == "_") throw ParseError(line_no, "missing POS tag");
        if (t.deprel.empty() || t.deprel == "_") throw ParseError(line_no, "missing DEPREL");
        const int expected = static_cast<int>(q.tokens.size()) + 1;
        if (t.index != expected) {
            throw ParseError(line_no, t.index < expected ? "duplicate token index " + cols[0]
                                                         : "token index gap at " + cols[0]);
        }
        q.tokens.push_back(std::move(t));
        token_lines.push_back(line_no);
    }
    if (q.tokens.empty()) throw ParseError(line_no, "no sentence");
    validate_tree(q, token_lines);
    if (q.raw_text.empty()) {
        std::vector<std::string> forms;
        for (const auto& t : q.tokens) forms.push_back(t.form);
        q.raw_text = join(forms, " ");
    }
    return q;
}

std::string serialize(const AnnotatedQuery& q) {
    const bool with_deps =
        std::any_of(q.tokens.begin(), q.tokens.end(), [](const Token& t) { return !t.enhanced.empty(); });
    std::ostringstream out;
    out << "# text = " << q.raw_text << '\n';
    for (const auto& t : q.tokens) {
        out << t.index << '\t' << t.form << '\t' << t.lemma << '\t' << t.pos << '\t' << t.head
            << '\t' << t.deprel;
        if (with_deps) {
            out << '\t';
            if (t.enhanced.empty()) {
                out << '_';
            } else {
                for (std::size_t i = 0; i < t.enhanced.size(); ++i)
                    out << (i ? "|" : "") << t.enhanced[i].first << ':' << t.enhanced[i].second;
            }
        }
        out << '\n';
    }
    return out.str();
}

std::vector<DependencyArc> arcs(const AnnotatedQuery& q) {
    std::vector<DependencyArc> out;
    std::set<std::tuple<int, int, std::string>> seen;
    for (const auto& t : q.tokens) {
        if (seen.emplace(t.head, t.index, t.deprel).second) out.push_back({t.deprel, t.head, t.index});
        for (const auto& [h, rel] : t.enhanced)
            if (seen.emplace(h, t.index, rel).second) out.push_back({rel, h, t.index});
    }
    return out;
}

bool deprel_matches(std::string_view label, std::string_view pattern) {
    const auto l = normalize_label(label);
    if (l == pattern) return true;
    const auto colon = l.find(':');
    return colon != std::string::npos && std::string_view(l).substr(0, colon) == pattern;
}

std::vector<ArcPair> find_dependency_pairs(const AnnotatedQuery& q, const PairPattern& pattern) {
    const auto accepts = [](const TokenFilter& f, int index) { return !f || f(index); };
    const auto all = arcs(q);
    std::vector<ArcPair> out;
    for (const auto& a : all) {
        if (a.governor == 0 || !deprel_matches(a.deprel, pattern.first)) continue;
        if (!accepts(pattern.first_dependent, a.dependent) || !accepts(pattern.governor, a.governor))
            continue;
        for (const auto& b : all) {
            if (&a == &b || b.governor != a.governor) continue;
            if (!deprel_matches(b.deprel, pattern.second)) continue;
            if (!accepts(pattern.second_dependent, b.dependent)) continue;
            out.emplace_back(a, b);
        }
    }
    return out;
}

AnnotatedQuery from_corenlp_json(std::string_view body, std::string_view raw_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw AnnotationServiceError(std::string("unparseable annotator response: ") + e.what());
    }
    try {
        const auto& sentences = doc.at("sentences");
        if (sentences.empty()) throw AnnotationServiceError("annotator returned no sentence");
        if (sentences.size() > 1)
            throw AnnotationServiceError("only single-sentence queries are accepted");
        const auto& s = sentences.front();

        AnnotatedQuery q;
        q.raw_text = std::string(raw_text);
        for (const auto& tok : s.at("tokens")) {
            Token t;
            t.index = tok.at("index").get<int>();
            t.form = tok.at("word").get<std::string>();
            t.lemma = tok.value("lemma", t.form);
            t.pos = tok.at("pos").get<std::string>();
            q.tokens.push_back(std::move(t));
        }
        const auto n = static_cast<int>(q.tokens.size());
        std::map<int, std::pair<int, std::string>> basic;
        for (const auto& d : s.at("basicDependencies")) {
            const int dep = d.at("dependent").get<int>();
            std::string rel = d.at("dep").get<std::string>();
            if (rel == "ROOT") rel = "root";
            if (dep < 1 || dep > n) throw AnnotationServiceError("dependency index out of range");
            basic[dep] = {d.at("governor").get<int>(), rel};
        }
        for (auto& t : q.tokens) {
            if (t.index < 1 || t.index > n || q.tokens[static_cast<std::size_t>(t.index - 1)].index != t.index)
                throw AnnotationServiceError("token indexes are not contiguous");
            const auto it = basic.find(t.index);
            if (it == basic.end())
                throw AnnotationServiceError("token " + std::to_string(t.index) + " has no head");
            t.head = it->second.first;
            t.deprel = it->second.second;
        }
        const char* enhanced_key = s.contains("enhancedPlusPlusDependencies")
                                       ? "enhancedPlusPlusDependencies"
                                       : (s.contains("enhancedDependencies") ? "enhancedDependencies"
                                                                              : nullptr);
        if (enhanced_key) {
            for (const auto& d : s.at(enhanced_key)) {
                const int dep = d.at("dependent").get<int>();
                const int gov = d.at("governor").get<int>();
                std::string rel = d.at("dep").get<std::string>();
                if (rel == "ROOT") rel = "root";
                if (dep < 1 || dep > n || gov < 0 || gov > n)
                    throw AnnotationServiceError("enhanced dependency index out of range");
                auto& t = q.tokens[static_cast<std::size_t>(dep - 1)];
                if (gov == t.head && rel == t.deprel) continue;
                const std::pair<int, std::string> arc{gov, rel};
                if (std::find(t.enhanced.begin(), t.enhanced.end(), arc) == t.enhanced.end())
                    t.enhanced.push_back(arc);
            }
        }
        // Re-validate through the file reader so both routes share one contract.
        try {
            return parse_annotated(serialize(q));
        } catch (const ParseError& e) {
            throw AnnotationServiceError(std::string("annotator returned an invalid tree: ") + e.what());
        }
    } catch (const nlohmann::json::exception& e) {
        throw AnnotationServiceError(std::string("unconvertible annotator response: ") + e.what());
    }
}

AnnotatorClient::AnnotatorClient(std::string endpoint, std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

AnnotatedQuery AnnotatorClient::annotate(std::string_view raw) const {
    if (trim(raw).empty()) throw AnnotationServiceError("empty query text");

    // Split "http://host:port/base" into the origin and the request path.
    std::string origin = endpoint_;
    std::string path = "/";
    if (const auto scheme = endpoint_.find("://"); scheme != std::string::npos) {
        if (const auto slash = endpoint_.find('/', scheme + 3); slash != std::string::npos) {
            origin = endpoint_.substr(0, slash);
            path = endpoint_.substr(slash);
        }
    }

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    const std::string properties =
        R"({"annotators":"tokenize,ssplit,pos,lemma,depparse","outputFormat":"json","ssplit.isOneSentence":"true"})";
    const httplib::Params params{{"properties", properties}};
    const auto target = httplib::append_query_params(path, params);
    auto res = client.Post(target, std::string(raw), "text/plain; charset=utf-8");
    if (!res)
        throw AnnotationServiceError("annotation service unreachable at " + endpoint_ + ": " +
                                     httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw AnnotationServiceError("annotation service returned HTTP " + std::to_string(res->status));
    return from_corenlp_json(res->body, raw);
}

AnnotatedQuery fetch_annotation(const std::string& endpoint, std::string_view raw) {
    return AnnotatorClient(endpoint).annotate(raw);
}

std::optional<std::string> annotator_url_from_env() {
    if (const char* v = std::getenv("KGQA_ANNOTATOR_URL"); v && *v) return std::string(v);
    return std::nullopt;
}

} // namespace kgqa::annotation
