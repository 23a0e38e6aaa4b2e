#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kgqa/activation.hpp"
#include "kgqa/error.hpp"
#include "kgqa/kg_store.hpp"
#include "kgqa/query_graph.hpp"
#include "kgqa/semantics.hpp"

namespace kgqa::decision {

using activation::CrossoverRelation;
using kg::KnowledgeGraph;

enum class EvidenceKind { R1, R2 };
enum class Polarity { positive, negative };

struct EvidenceTag {
    EvidenceKind kind = EvidenceKind::R1;
    Polarity polarity = Polarity::positive;
    double pdict_sim = 0.0;
    CrossoverRelation cr;
};

/// What a crossover edge must connect to and how it is compared.
struct Constraint {
    /// Property node; nullopt accepts any obj-side node.
    std::optional<std::string> c_obj;
    /// Quad predicate; nullopt matches every relation with similarity 1.
    std::optional<std::string> predicate;
};

std::vector<EvidenceTag> classify_evidence(const std::string& candidate, const Constraint& constraint,
                                           std::span<const CrossoverRelation> cr, const KnowledgeGraph& kg,
                                           const semantics::Semantics& sem);

std::vector<EvidenceTag> classify_evidence(const std::string& candidate, const qg::ConstraintQuad& quad,
                                           const activation::SubgraphResult& result, const KnowledgeGraph& kg,
                                           const semantics::Semantics& sem);

struct FeatureVector {
    double p_r1 = 0.0;
    double p_r2 = 0.0;
    double n_r1 = 0.0;
    double n_r2 = 0.0;

    Eigen::Vector4d vec() const { return {p_r1, p_r2, n_r1, n_r2}; }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// m: number of candidate leaves under the category; n: number of subclasses of c_obj.
FeatureVector extract_features(std::span<const EvidenceTag> tags, std::size_t m, std::size_t n);
FeatureVector extract_features(std::span<const EvidenceTag> tags, const KnowledgeGraph& kg,
                               const std::optional<std::string>& c_obj, std::size_t m);

struct LabeledExample {
    FeatureVector features;
    int label = 0;
};

using Dataset = std::vector<LabeledExample>;

Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& data, std::ostream& out);

/// Positives carry strong positive evidence and no negative flags; negatives either lack
/// positive evidence or carry a negative flag.
Dataset generate_synthetic(std::size_t n, std::uint64_t seed);

/// Shuffled split; returns {train, test}.
std::pair<Dataset, Dataset> split_dataset(Dataset data, double test_fraction, std::uint64_t seed);

enum class ModelKind { mlp, gaussian_bayes, logistic };

std::string_view model_kind_name(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view name);

struct TrainOptions {
    std::vector<int> hidden{10, 20, 10};
    double learning_rate = 0.01;
    int epochs = 500;
    std::size_t batch_size = 16;
    std::uint64_t seed = 42;
    double prior_negative = 0.15;
    double prior_positive = 0.85;
    double variance_floor = 1e-6;
};

struct Prediction {
    int label = 0;
    double confidence = 0.0;
};

class DecisionModel {
public:
    virtual ~DecisionModel() = default;

    virtual ModelKind kind() const noexcept = 0;
    virtual bool trained() const noexcept = 0;
    /// Throws Error(model_state) when untrained.
    virtual Prediction predict(const FeatureVector& x) const = 0;

    std::uint64_t seed = 0;
    int epochs = 0;
};

/// Fully connected network: ReLU hidden layers, sigmoid output. With no hidden layers it is
/// logistic regression.
class FeedForward : public DecisionModel {
public:
    FeedForward(ModelKind kind, std::vector<int> layer_sizes);

    ModelKind kind() const noexcept override { return kind_; }
    bool trained() const noexcept override { return trained_; }
    Prediction predict(const FeatureVector& x) const override;

    void initialize(std::mt19937_64& rng);
    void mark_trained() noexcept { trained_ = true; }

    /// Pre-activation of the output unit.
    double logit(const Eigen::VectorXd& x) const;
    /// Mean binary cross-entropy over the columns of X.
    double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;
    /// Backpropagated gradients of loss(), same shapes as weights / biases.
    void gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::MatrixXd>& dW,
                  std::vector<Eigen::VectorXd>& db) const;

    const std::vector<int>& layer_sizes() const noexcept { return sizes_; }

    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

private:
    ModelKind kind_;
    std::vector<int> sizes_;
    bool trained_ = false;
};

class GaussianBayes : public DecisionModel {
public:
    GaussianBayes(double prior_negative = 0.15, double prior_positive = 0.85, double variance_floor = 1e-6);

    ModelKind kind() const noexcept override { return ModelKind::gaussian_bayes; }
    bool trained() const noexcept override { return trained_; }
    Prediction predict(const FeatureVector& x) const override;

    void fit(const Dataset& data);
    void set_parameters(const std::array<Eigen::Vector4d, 2>& mean, const std::array<Eigen::Vector4d, 2>& var);

    std::array<double, 2> priors;
    std::array<Eigen::Vector4d, 2> mean;
    std::array<Eigen::Vector4d, 2> var;
    double variance_floor;

private:
    bool trained_ = false;
};

std::unique_ptr<DecisionModel> train(const Dataset& data, ModelKind kind, const TrainOptions& options = {});

struct EvalMetrics {
    double balanced_accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double confidence_mse = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

enum class MseMode { positives, all };

EvalMetrics evaluate(const DecisionModel& model, const Dataset& data, MseMode mode = MseMode::positives);
EvalMetrics metrics_from(std::span<const int> labels, std::span<const Prediction> predictions,
                         MseMode mode = MseMode::positives);

void save_model(const DecisionModel& model, std::ostream& out);
void save_model(const DecisionModel& model, const std::filesystem::path& path);
std::unique_ptr<DecisionModel> load_model(std::istream& in);
std::unique_ptr<DecisionModel> load_model(const std::filesystem::path& path);

} // namespace kgqa::decision
