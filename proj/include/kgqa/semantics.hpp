#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace kgqa::semantics {

using Vector = Eigen::VectorXd;

class EmbeddingStore {
public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::size_t dimension) : dimension_(dimension) {}

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return vectors_.size(); }

    /// Keeps the first vector for a token; returns false for a duplicate.
    bool insert(std::string_view token, Vector v);
    const Vector* find(std::string_view token) const;

private:
    std::size_t dimension_ = 0;
    std::unordered_map<std::string, Vector> vectors_;
};

/// `token c1 ... cd` per line, optional `count dim` header.
EmbeddingStore load_embeddings(std::istream& in);
EmbeddingStore load_embeddings(const std::filesystem::path& path);

/// Splits on underscores and whitespace, lowercases.
std::vector<std::string> phrase_tokens(std::string_view phrase);

/// Mean of in-vocabulary token vectors; nullopt when none is known or the mean is zero.
std::optional<Vector> phrase_vector(const EmbeddingStore& store, std::string_view phrase);

/// max(0, cosine); exact canonical match when either vector is missing.
double predicate_similarity(const EmbeddingStore& store, std::string_view p1, std::string_view p2);

const std::set<std::string>& default_negation_lexicon();

class PolarityDetector {
public:
    PolarityDetector() : lexicon_(default_negation_lexicon()) {}
    explicit PolarityDetector(std::set<std::string> lexicon) : lexicon_(std::move(lexicon)) {}

    bool is_negative(std::string_view phrase) const;
    const std::set<std::string>& lexicon() const noexcept { return lexicon_; }

private:
    std::set<std::string> lexicon_;
};

bool is_negative_predicate(std::string_view phrase);

/// Embeddings plus polarity detection, shared read-only by the solver.
struct Semantics {
    EmbeddingStore store;
    PolarityDetector polarity;

    double similarity(std::string_view a, std::string_view b) const { return predicate_similarity(store, a, b); }
    bool negative(std::string_view p) const { return polarity.is_negative(p); }
};

} // namespace kgqa::semantics
