#include "kgqa/decision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kgqa::decision {

using nlohmann::json;

// ---------------------------------------------------------------------------------------
// Evidence and features

std::vector<EvidenceTag> classify_evidence(const std::string& candidate, const Constraint& constraint,
                                           std::span<const CrossoverRelation> cr, const KnowledgeGraph& kg,
                                           const semantics::Semantics& sem) {
    std::set<std::string> subj_side{candidate};
    for (auto& s : kg::superclasses(kg, candidate)) subj_side.insert(std::move(s));

    std::set<std::string> r1_side, r2_side;
    if (constraint.c_obj) {
        r1_side.insert(*constraint.c_obj);
        for (auto& s : kg::superclasses(kg, *constraint.c_obj)) r1_side.insert(std::move(s));
        for (auto& s : kg::subclasses(kg, *constraint.c_obj)) r2_side.insert(std::move(s));
    }

    std::vector<EvidenceTag> tags;
    for (const auto& rel : cr) {
        if (!subj_side.count(rel.subj_side_node)) continue;
        EvidenceTag tag;
        tag.cr = rel;
        if (!constraint.c_obj || r1_side.count(rel.obj_side_node))
            tag.kind = EvidenceKind::R1;
        else if (r2_side.count(rel.obj_side_node))
            tag.kind = EvidenceKind::R2;
        else
            continue;
        if (constraint.predicate) {
            tag.polarity = sem.negative(rel.predicate) ? Polarity::negative : Polarity::positive;
            tag.pdict_sim = sem.similarity(rel.predicate, *constraint.predicate);
        } else {
            tag.polarity = Polarity::positive;
            tag.pdict_sim = 1.0;
        }
        tags.push_back(std::move(tag));
    }
    return tags;
}

std::vector<EvidenceTag> classify_evidence(const std::string& candidate, const qg::ConstraintQuad& quad,
                                           const activation::SubgraphResult& result, const KnowledgeGraph& kg,
                                           const semantics::Semantics& sem) {
    Constraint c;
    c.c_obj = result.node_obj;
    if (quad.predicate.wildcard != qg::Wildcard::any_relation) c.predicate = quad.predicate.text();
    return classify_evidence(candidate, c, result.cr, kg, sem);
}

FeatureVector extract_features(std::span<const EvidenceTag> tags, std::size_t m, std::size_t n) {
    FeatureVector f;
    double r2_sum = 0.0;
    bool any_r2 = false;
    for (const auto& t : tags) {
        const bool r1 = t.kind == EvidenceKind::R1;
        if (t.polarity == Polarity::negative) {
            (r1 ? f.n_r1 : f.n_r2) = 1.0;
        } else if (r1) {
            f.p_r1 = std::max(f.p_r1, t.pdict_sim);
        } else {
            r2_sum += t.pdict_sim;
            any_r2 = true;
        }
    }
    if (any_r2) {
        if (m == 0 || n == 0) throw ValidationError("R2 evidence with an empty leaf or subclass set");
        f.p_r2 = std::min(1.0, r2_sum / static_cast<double>(m * n));
    }
    return f;
}

FeatureVector extract_features(std::span<const EvidenceTag> tags, const KnowledgeGraph& kg,
                               const std::optional<std::string>& c_obj, std::size_t m) {
    const std::size_t n = c_obj ? kg::subclasses(kg, *c_obj).size() : 0;
    return extract_features(tags, m, n);
}

// ---------------------------------------------------------------------------------------
// Datasets

Dataset read_dataset(std::istream& in) {
    Dataset out;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split(line, ',');
        for (auto& f : fields) f = std::string(trim(f));
        if (!header) {
            if (fields != std::vector<std::string>{"p_r1", "p_r2", "n_r1", "n_r2", "label"})
                throw ParseError(line_no, "expected header p_r1,p_r2,n_r1,n_r2,label");
            header = true;
            continue;
        }
        if (fields.size() != 5) throw ParseError(line_no, "expected 5 fields");
        std::array<double, 5> v{};
        for (std::size_t k = 0; k < 5; ++k) {
            try {
                std::size_t used = 0;
                v[k] = std::stod(fields[k], &used);
                if (used != fields[k].size()) throw std::invalid_argument(fields[k]);
            } catch (const std::exception&) {
                throw ParseError(line_no, "not a number: '" + fields[k] + "'");
            }
        }
        if (v[4] != 0.0 && v[4] != 1.0) throw ParseError(line_no, "label must be 0 or 1");
        out.push_back({{v[0], v[1], v[2], v[3]}, static_cast<int>(v[4])});
    }
    if (!header) throw ParseError(line_no, "missing header");
    return out;
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open dataset " + path.string());
    return read_dataset(in);
}

void write_dataset(const Dataset& data, std::ostream& out) {
    out << "p_r1,p_r2,n_r1,n_r2,label\n";
    out.precision(17);
    for (const auto& e : data)
        out << e.features.p_r1 << ',' << e.features.p_r2 << ',' << e.features.n_r1 << ',' << e.features.n_r2 << ','
            << e.label << '\n';
}

Dataset generate_synthetic(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    const auto coin = [&](double p) { return u(rng) < p ? 1.0 : 0.0; };

    Dataset out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        LabeledExample e;
        e.label = k % 2 == 0 ? 1 : 0;
        auto& f = e.features;
        if (e.label == 1) {
            f.p_r1 = uniform(0.7, 1.0);
            f.p_r2 = coin(0.5) > 0 ? uniform(0.2, 0.6) : 0.0;
        } else if (u(rng) < 0.8) {
            f.p_r1 = uniform(0.0, 0.3);
            f.p_r2 = uniform(0.0, 0.1);
            f.n_r1 = coin(0.5);
            f.n_r2 = coin(0.3);
        } else {
            // strong positive evidence contradicted by a negative relation
            f.p_r1 = uniform(0.7, 1.0);
            f.p_r2 = uniform(0.0, 0.6);
            f.n_r1 = 1.0;
            f.n_r2 = coin(0.5);
        }
        out.push_back(e);
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

std::pair<Dataset, Dataset> split_dataset(Dataset data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test fraction must lie in (0,1)");
    std::mt19937_64 rng(seed);
    std::shuffle(data.begin(), data.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size())));
    Dataset test(data.end() - static_cast<std::ptrdiff_t>(n_test), data.end());
    data.resize(data.size() - n_test);
    return {std::move(data), std::move(test)};
}

// ---------------------------------------------------------------------------------------
// Models

std::string_view model_kind_name(ModelKind k) noexcept {
    switch (k) {
    case ModelKind::mlp: return "mlp";
    case ModelKind::gaussian_bayes: return "gaussian-bayes";
    case ModelKind::logistic: return "logistic";
    }
    return "";
}

ModelKind parse_model_kind(std::string_view name) {
    for (auto k : {ModelKind::mlp, ModelKind::gaussian_bayes, ModelKind::logistic})
        if (model_kind_name(k) == name) return k;
    throw ValidationError("unknown model kind '" + std::string(name) + "' (mlp, gaussian-bayes, logistic)");
}

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void require_trained(const DecisionModel& m) {
    if (!m.trained()) throw Error(ErrorCode::model_state, "model has not been trained");
}

} // namespace

FeedForward::FeedForward(ModelKind kind, std::vector<int> layer_sizes) : kind_(kind), sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2 || sizes_.front() != 4 || sizes_.back() != 1)
        throw ValidationError("network must map 4 features to 1 output");
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
        if (sizes_[l] <= 0) throw ValidationError("layer sizes must be positive");
        weights.emplace_back(Eigen::MatrixXd::Zero(sizes_[l], sizes_[l - 1]));
        biases.emplace_back(Eigen::VectorXd::Zero(sizes_[l]));
    }
}

void FeedForward::initialize(std::mt19937_64& rng) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const double fan_in = static_cast<double>(weights[l].cols());
        const bool hidden = l + 1 < weights.size();
        std::normal_distribution<double> d(0.0, std::sqrt((hidden ? 2.0 : 1.0) / fan_in));
        for (Eigen::Index i = 0; i < weights[l].size(); ++i) weights[l].data()[i] = d(rng);
        biases[l].setZero();
    }
}

double FeedForward::logit(const Eigen::VectorXd& x) const {
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Eigen::VectorXd z = weights[l] * a + biases[l];
        a = l + 1 < weights.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    return a[0];
}

Prediction FeedForward::predict(const FeatureVector& x) const {
    require_trained(*this);
    const double p = sigmoid(logit(x.vec()));
    return {p >= 0.5 ? 1 : 0, p};
}

double FeedForward::loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
    double total = 0.0;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double z = logit(X.col(c));
        total += softplus(z) - y[c] * z;
    }
    return total / static_cast<double>(X.cols());
}

void FeedForward::gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::MatrixXd>& dW,
                           std::vector<Eigen::VectorXd>& db) const {
    const std::size_t L = weights.size();
    const double batch = static_cast<double>(X.cols());
    std::vector<Eigen::MatrixXd> act{X};
    std::vector<Eigen::MatrixXd> pre;
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = (weights[l] * act.back()).colwise() + biases[l];
        pre.push_back(z);
        act.push_back(l + 1 < L ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z);
    }
    dW.assign(L, {});
    db.assign(L, {});
    Eigen::MatrixXd delta(1, X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) delta(0, c) = (sigmoid(pre.back()(0, c)) - y[c]) / batch;
    for (std::size_t l = L; l-- > 0;) {
        dW[l] = delta * act[l].transpose();
        db[l] = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd back = weights[l].transpose() * delta;
        delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
}

GaussianBayes::GaussianBayes(double prior_negative, double prior_positive, double floor)
    : priors{prior_negative, prior_positive}, variance_floor(floor) {
    if (!(prior_negative > 0 && prior_positive > 0)) throw ValidationError("class priors must be positive");
    mean = {Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero()};
    var = {Eigen::Vector4d::Ones(), Eigen::Vector4d::Ones()};
}

void GaussianBayes::fit(const Dataset& data) {
    std::array<std::size_t, 2> count{0, 0};
    std::array<Eigen::Vector4d, 2> sum{Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero()};
    for (const auto& e : data) {
        ++count[e.label];
        sum[e.label] += e.features.vec();
    }
    if (count[0] == 0 || count[1] == 0) throw Error(ErrorCode::training, "gaussian-bayes needs both classes");
    std::array<Eigen::Vector4d, 2> sq{Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero()};
    for (int c = 0; c < 2; ++c) mean[c] = sum[c] / static_cast<double>(count[c]);
    for (const auto& e : data) {
        const Eigen::Vector4d d = e.features.vec() - mean[e.label];
        sq[e.label] += d.cwiseProduct(d);
    }
    for (int c = 0; c < 2; ++c) var[c] = (sq[c] / static_cast<double>(count[c])).cwiseMax(variance_floor);
    trained_ = true;
}

void GaussianBayes::set_parameters(const std::array<Eigen::Vector4d, 2>& m, const std::array<Eigen::Vector4d, 2>& v) {
    mean = m;
    for (int c = 0; c < 2; ++c) var[c] = v[c].cwiseMax(variance_floor);
    trained_ = true;
}

Prediction GaussianBayes::predict(const FeatureVector& x) const {
    require_trained(*this);
    const Eigen::Vector4d v = x.vec();
    std::array<double, 2> log_post{};
    for (int c = 0; c < 2; ++c) {
        double lp = std::log(priors[c]);
        for (int k = 0; k < 4; ++k) {
            const double d = v[k] - mean[c][k];
            lp += -0.5 * std::log(2.0 * M_PI * var[c][k]) - d * d / (2.0 * var[c][k]);
        }
        log_post[c] = lp;
    }
    const double p = sigmoid(log_post[1] - log_post[0]);
    return {log_post[1] >= log_post[0] ? 1 : 0, p};
}

std::unique_ptr<DecisionModel> train(const Dataset& data, ModelKind kind, const TrainOptions& options) {
    if (data.empty()) throw Error(ErrorCode::training, "empty dataset");
    if (kind == ModelKind::gaussian_bayes) {
        auto m = std::make_unique<GaussianBayes>(options.prior_negative, options.prior_positive,
                                                 options.variance_floor);
        m->fit(data);
        m->seed = options.seed;
        return m;
    }
    if (options.batch_size == 0 || options.epochs <= 0 || !(options.learning_rate > 0))
        throw ValidationError("invalid optimizer settings");

    std::vector<int> sizes{4};
    if (kind == ModelKind::mlp) sizes.insert(sizes.end(), options.hidden.begin(), options.hidden.end());
    sizes.push_back(1);
    auto net = std::make_unique<FeedForward>(kind, sizes);
    std::mt19937_64 rng(options.seed);
    net->initialize(rng);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            Eigen::MatrixXd X(4, static_cast<Eigen::Index>(end - start));
            Eigen::VectorXd y(static_cast<Eigen::Index>(end - start));
            for (std::size_t i = start; i < end; ++i) {
                const auto c = static_cast<Eigen::Index>(i - start);
                X.col(c) = data[order[i]].features.vec();
                y[c] = data[order[i]].label;
            }
            net->gradient(X, y, dW, db);
            for (std::size_t l = 0; l < dW.size(); ++l) {
                net->weights[l] -= options.learning_rate * dW[l];
                net->biases[l] -= options.learning_rate * db[l];
            }
        }
    }
    net->mark_trained();
    net->seed = options.seed;
    net->epochs = options.epochs;
    return net;
}

// ---------------------------------------------------------------------------------------
// Metrics

EvalMetrics metrics_from(std::span<const int> labels, std::span<const Prediction> predictions, MseMode mode) {
    if (labels.empty() || labels.size() != predictions.size())
        throw ValidationError("evaluation needs one prediction per example");
    EvalMetrics m;
    double sq = 0.0;
    std::size_t sq_n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        const auto& p = predictions[i];
        if (y == 1) (p.label == 1 ? m.tp : m.fn)++;
        else (p.label == 1 ? m.fp : m.tn)++;
        if (y == 1 || mode == MseMode::all) {
            const double d = static_cast<double>(y) - p.confidence;
            sq += d * d;
            ++sq_n;
        }
    }
    const auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : double(a) / double(b); };
    const std::size_t pos = m.tp + m.fn, neg = m.tn + m.fp;
    if (pos > 0 && neg > 0)
        m.balanced_accuracy = 0.5 * (ratio(m.tp, pos) + ratio(m.tn, neg));
    else
        m.balanced_accuracy = pos > 0 ? ratio(m.tp, pos) : ratio(m.tn, neg);
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, pos);
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.confidence_mse = sq_n > 0 ? sq / static_cast<double>(sq_n) : 0.0;
    return m;
}

EvalMetrics evaluate(const DecisionModel& model, const Dataset& data, MseMode mode) {
    std::vector<int> labels;
    std::vector<Prediction> preds;
    for (const auto& e : data) {
        labels.push_back(e.label);
        preds.push_back(model.predict(e.features));
    }
    return metrics_from(labels, preds, mode);
}

// ---------------------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kModelFormat = "kgqa-decision-model";
constexpr int kModelVersion = 1;

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json vector_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) throw FormatError("weight matrix shape");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw FormatError("weight matrix shape");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index n) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) throw FormatError("vector shape");
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

} // namespace

void save_model(const DecisionModel& model, std::ostream& out) {
    require_trained(model);
    json doc{{"format", kModelFormat},
             {"version", kModelVersion},
             {"kind", model_kind_name(model.kind())},
             {"seed", model.seed},
             {"epochs", model.epochs}};
    if (auto* net = dynamic_cast<const FeedForward*>(&model)) {
        json layers = json::array();
        for (std::size_t l = 0; l < net->weights.size(); ++l)
            layers.push_back({{"weights", matrix_json(net->weights[l])}, {"bias", vector_json(net->biases[l])}});
        doc["params"] = {{"layer_sizes", net->layer_sizes()}, {"layers", layers}};
    } else if (auto* nb = dynamic_cast<const GaussianBayes*>(&model)) {
        doc["params"] = {{"priors", {nb->priors[0], nb->priors[1]}},
                         {"variance_floor", nb->variance_floor},
                         {"mean", {vector_json(nb->mean[0]), vector_json(nb->mean[1])}},
                         {"variance", {vector_json(nb->var[0]), vector_json(nb->var[1])}}};
    }
    out << std::setprecision(17) << doc.dump(1) << '\n';
}

void save_model(const DecisionModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write model " + path.string());
    save_model(model, out);
}

std::unique_ptr<DecisionModel> load_model(std::istream& in) {
    try {
        const json doc = json::parse(in);
        if (doc.at("format") != kModelFormat) throw FormatError("not a decision model file");
        if (doc.at("version") != kModelVersion) throw FormatError("unsupported model version");
        const auto kind = parse_model_kind(doc.at("kind").get<std::string>());
        const auto& p = doc.at("params");
        std::unique_ptr<DecisionModel> model;
        if (kind == ModelKind::gaussian_bayes) {
            auto nb = std::make_unique<GaussianBayes>(p.at("priors").at(0).get<double>(),
                                                      p.at("priors").at(1).get<double>(),
                                                      p.at("variance_floor").get<double>());
            std::array<Eigen::Vector4d, 2> mean, var;
            for (std::size_t c = 0; c < 2; ++c) {
                mean[c] = vector_from(p.at("mean").at(c), 4);
                var[c] = vector_from(p.at("variance").at(c), 4);
            }
            nb->set_parameters(mean, var);
            model = std::move(nb);
        } else {
            auto sizes = p.at("layer_sizes").get<std::vector<int>>();
            auto net = std::make_unique<FeedForward>(kind, sizes);
            const auto& layers = p.at("layers");
            if (layers.size() != net->weights.size()) throw FormatError("layer count mismatch");
            for (std::size_t l = 0; l < net->weights.size(); ++l) {
                net->weights[l] = matrix_from(layers.at(l).at("weights"), sizes[l + 1], sizes[l]);
                net->biases[l] = vector_from(layers.at(l).at("bias"), sizes[l + 1]);
            }
            net->mark_trained();
            model = std::move(net);
        }
        model->seed = doc.value("seed", std::uint64_t{0});
        model->epochs = doc.value("epochs", 0);
        return model;
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file: ") + e.what());
    } catch (const ValidationError& e) {
        throw FormatError(std::string("model file: ") + e.what());
    }
}

std::unique_ptr<DecisionModel> load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open model " + path.string());
    return load_model(in);
}

} // namespace kgqa::decision
