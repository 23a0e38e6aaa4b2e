#include "kgqa/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "kgqa/error.hpp"
#include "kgqa/text.hpp"

namespace kgqa::semantics {

bool EmbeddingStore::insert(std::string_view token, Vector v) {
    if (static_cast<std::size_t>(v.size()) != dimension_)
        throw FormatError("vector for '" + std::string(token) + "' has dimension " + std::to_string(v.size()) +
                          ", expected " + std::to_string(dimension_));
    return vectors_.emplace(to_lower(token), std::move(v)).second;
}

const Vector* EmbeddingStore::find(std::string_view token) const {
    auto it = vectors_.find(std::string(token));
    return it == vectors_.end() ? nullptr : &it->second;
}

namespace {

[[noreturn]] void bad_line(std::size_t line_no, const std::string& msg) {
    throw FormatError("line " + std::to_string(line_no) + ": " + msg);
}

bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size() && std::isfinite(out);
    } catch (const std::exception&) {
        return false;
    }
}

bool is_header(const std::vector<std::string>& fields) {
    if (fields.size() != 2) return false;
    for (const auto& f : fields)
        if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos) return false;
    return true;
}

} // namespace

EmbeddingStore load_embeddings(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<EmbeddingStore> store;
    std::size_t duplicates = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = split_whitespace(line);
        if (fields.empty()) continue;
        if (!store && line_no == 1 && is_header(fields)) {
            store.emplace(std::stoul(fields[1]));
            continue;
        }
        if (fields.size() < 2) bad_line(line_no, "expected a token followed by vector components");
        const std::size_t d = fields.size() - 1;
        if (!store) store.emplace(d);
        if (d != store->dimension())
            bad_line(line_no, "expected " + std::to_string(store->dimension()) + " components, found " +
                                          std::to_string(d));
        Vector v(static_cast<Eigen::Index>(d));
        for (std::size_t k = 0; k < d; ++k) {
            double x = 0;
            if (!parse_double(fields[k + 1], x)) bad_line(line_no, "bad component '" + fields[k + 1] + "'");
            v[static_cast<Eigen::Index>(k)] = x;
        }
        if (!store->insert(fields[0], std::move(v))) ++duplicates;
    }
    if (duplicates > 0) spdlog::warn("embeddings: {} duplicate tokens ignored", duplicates);
    return store ? std::move(*store) : EmbeddingStore{};
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open embeddings file " + path.string());
    return load_embeddings(in);
}

std::vector<std::string> phrase_tokens(std::string_view phrase) {
    std::string s(phrase);
    std::replace(s.begin(), s.end(), '_', ' ');
    auto parts = split_whitespace(s);
    for (auto& p : parts) p = to_lower(p);
    return parts;
}

std::optional<Vector> phrase_vector(const EmbeddingStore& store, std::string_view phrase) {
    if (store.dimension() == 0) return std::nullopt;
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(store.dimension()));
    int known = 0;
    for (const auto& t : phrase_tokens(phrase)) {
        if (const Vector* v = store.find(t)) {
            sum += *v;
            ++known;
        }
    }
    if (known == 0) return std::nullopt;
    Vector mean = sum / known;
    if (mean.norm() == 0.0) return std::nullopt;
    return mean;
}

double predicate_similarity(const EmbeddingStore& store, std::string_view p1, std::string_view p2) {
    const auto t1 = phrase_tokens(p1);
    const bool same = !t1.empty() && t1 == phrase_tokens(p2);
    auto v1 = phrase_vector(store, p1);
    auto v2 = phrase_vector(store, p2);
    if (!v1 || !v2 || same) return same ? 1.0 : 0.0;
    const double c = v1->dot(*v2) / (v1->norm() * v2->norm());
    return std::clamp(c, 0.0, 1.0);
}

const std::set<std::string>& default_negation_lexicon() {
    static const std::set<std::string> lexicon{"not",     "no",  "never",        "cannot",
                                               "without", "n't", "incompatible", "unsupported"};
    return lexicon;
}

bool PolarityDetector::is_negative(std::string_view phrase) const {
    for (const auto& t : phrase_tokens(phrase)) {
        if (lexicon_.count(t)) return true;
        // "doesn't" style contractions keep the clitic attached
        if (t.size() > 3 && t.ends_with("n't") && lexicon_.count("n't")) return true;
    }
    return false;
}

bool is_negative_predicate(std::string_view phrase) {
    static const PolarityDetector detector;
    return detector.is_negative(phrase);
}

} // namespace kgqa::semantics
