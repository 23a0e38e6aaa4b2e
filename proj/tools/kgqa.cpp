// Command-line entry point: build-kg, query, eval, train, gen-dataset, serve.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "kgqa/annotation.hpp"
#include "kgqa/decision.hpp"
#include "kgqa/error.hpp"
#include "kgqa/pipeline.hpp"
#include "kgqa/service.hpp"

#include <httplib.h>

using namespace kgqa;

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

struct BuildArgs {
    std::string triples, synonyms, equiv, types, out;
    double default_weight = 0.95;
};

struct EngineArgs {
    std::string kg, embeddings, model;
};

struct QueryArgs {
    EngineArgs engine;
    std::string annotated, text, annotator_url;
    std::optional<double> at, df;
    std::optional<int> st;
    std::string combine = "intersection";
    std::optional<std::uint64_t> seed;
    bool json = false;
};

struct EvalArgs {
    std::string dataset, kind = "mlp";
    std::uint64_t seed = 42, split_seed = 11;
    double test_fraction = 0.3;
    std::string mse = "positives";
};

struct TrainArgs {
    std::string dataset, kind = "mlp", out;
    std::uint64_t seed = 42;
    int epochs = 500;
};

struct GenArgs {
    std::size_t n = 1000;
    std::uint64_t seed = 7;
    std::string out;
};

struct ServeArgs {
    EngineArgs engine;
    std::string host = "0.0.0.0", annotator_url, origin = "*";
    int port = 8080;
};

int build_kg(const BuildArgs& a) {
    pipeline::BuildInputs in;
    in.triples = a.triples;
    if (!a.synonyms.empty()) in.synonyms = a.synonyms;
    if (!a.equiv.empty()) in.equivalence = a.equiv;
    if (!a.types.empty()) in.types = a.types;
    in.weights.default_weight = a.default_weight;
    pipeline::BuildReport report;
    const auto g = pipeline::build_kg(in, &report);
    kg::save_snapshot(g, std::filesystem::path(a.out));
    std::cout << "entities " << g.entity_count() << "\n"
              << "edges " << g.edge_count() << "\n"
              << "merged synonyms " << report.merged_synonyms << "\n"
              << "head-rule edges " << report.head_edges << "\n"
              << "equivalence edges " << report.equivalence_edges << "\n"
              << "type edges " << report.type_edges << "\n"
              << "snapshot " << a.out << "\n";
    return 0;
}

void print_outcome(const pipeline::QueryOutcome& out) {
    std::cout << "query graph:\n";
    for (const auto& r : out.graph.quads) std::cout << "  " << r.quad.to_string() << "\n";
    if (out.result.answers.empty()) std::cout << "no answer\n";
    int rank = 1;
    for (const auto& a : out.result.answers) std::printf("%3d  %-32s %.6f\n", rank++, a.entity.c_str(), a.confidence);
    std::cout << "explanation:\n";
    for (const auto& n : out.result.explanation.nodes)
        std::cout << "  node " << n.id << " [" << reasoner::node_role_name(n.role) << ", layer " << n.layer << "]\n";
    for (const auto& e : out.result.explanation.edges)
        std::cout << "  edge " << e.source << " -" << e.predicate << "-> " << e.target << (e.from_cr ? " (cr)" : "")
                  << "\n";
}

int query(const QueryArgs& a) {
    std::string url = a.annotator_url;
    if (url.empty())
        if (auto env = annotation::annotator_url_from_env()) url = *env;
    if (a.annotated.empty() && a.text.empty()) {
        std::cerr << "query: give --annotated FILE or --text TEXT\n";
        return kUsage;
    }
    if (!a.text.empty() && url.empty()) {
        std::cerr << "query: --text needs --annotator-url or KGQA_ANNOTATOR_URL\n";
        return kUsage;
    }
    const auto engine = pipeline::load_engine(a.engine.kg, a.engine.embeddings, a.engine.model);
    annotation::AnnotatedQuery q;
    if (!a.annotated.empty()) {
        std::ifstream in(a.annotated);
        if (!in) throw FormatError("cannot open " + a.annotated);
        q = annotation::parse_annotated(in);
    } else {
        q = annotation::fetch_annotation(url, a.text);
    }
    service::QueryOverrides o{a.at, a.df, a.st, reasoner::parse_combine_mode(a.combine), a.seed};
    const auto out = pipeline::answer(engine, q, service::apply_overrides(o));
    if (a.json)
        std::cout << service::to_json(service::make_response(out)).dump(2) << "\n";
    else
        print_outcome(out);
    return 0;
}

int eval(const EvalArgs& a) {
    const auto data = decision::read_dataset(std::filesystem::path(a.dataset));
    auto [train, test] = decision::split_dataset(data, a.test_fraction, a.split_seed);
    decision::TrainOptions opts;
    opts.seed = a.seed;
    const auto kind = decision::parse_model_kind(a.kind);
    const auto model = decision::train(train, kind, opts);
    const auto mode = a.mse == "all" ? decision::MseMode::all : decision::MseMode::positives;
    const auto m = decision::evaluate(*model, test, mode);
    std::printf("model              %s\n", std::string(decision::model_kind_name(kind)).c_str());
    std::printf("train / test       %zu / %zu\n", train.size(), test.size());
    std::printf("balanced accuracy  %.4f\n", m.balanced_accuracy);
    std::printf("precision          %.4f\n", m.precision);
    std::printf("recall             %.4f\n", m.recall);
    std::printf("f1                 %.4f\n", m.f1);
    std::printf("confidence mse     %.6f\n", m.confidence_mse);
    std::printf("tp fp tn fn        %zu %zu %zu %zu\n", m.tp, m.fp, m.tn, m.fn);
    return 0;
}

int train(const TrainArgs& a) {
    const auto data = decision::read_dataset(std::filesystem::path(a.dataset));
    decision::TrainOptions opts;
    opts.seed = a.seed;
    opts.epochs = a.epochs;
    const auto model = decision::train(data, decision::parse_model_kind(a.kind), opts);
    decision::save_model(*model, std::filesystem::path(a.out));
    const auto m = decision::evaluate(*model, data);
    std::printf("trained %s on %zu examples, training balanced accuracy %.4f\n", a.kind.c_str(), data.size(),
                m.balanced_accuracy);
    return 0;
}

int gen_dataset(const GenArgs& a) {
    const auto data = decision::generate_synthetic(a.n, a.seed);
    if (a.out.empty() || a.out == "-") {
        decision::write_dataset(data, std::cout);
    } else {
        std::ofstream out(a.out);
        if (!out) throw FormatError("cannot write " + a.out);
        decision::write_dataset(data, out);
    }
    return 0;
}

int serve(const ServeArgs& a) {
    const auto engine = pipeline::load_engine(a.engine.kg, a.engine.embeddings, a.engine.model);
    service::ServiceConfig cfg;
    if (!a.annotator_url.empty())
        cfg.annotator_url = a.annotator_url;
    else
        cfg.annotator_url = annotation::annotator_url_from_env();
    const service::Service svc(engine, cfg);
    httplib::Server server;
    service::mount(server, svc, a.origin);
    const int port = service::port_from_env(a.port);
    spdlog::info("serving {} entities, {} edges on {}:{}", engine.kg.entity_count(), engine.kg.edge_count(), a.host,
                 port);
    if (!server.listen(a.host, port)) {
        spdlog::error("cannot listen on {}:{}", a.host, port);
        return kFailure;
    }
    return 0;
}

void engine_options(CLI::App* cmd, EngineArgs& e) {
    cmd->add_option("--kg", e.kg, "KG snapshot")->required()->check(CLI::ExistingFile);
    cmd->add_option("--embeddings", e.embeddings, "word vector file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--model", e.model, "decision model file")->required()->check(CLI::ExistingFile);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-graph question answering"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    BuildArgs build;
    auto* build_cmd = app.add_subcommand("build-kg", "load and augment triples, write a snapshot");
    build_cmd->add_option("--triples", build.triples)->required()->check(CLI::ExistingFile);
    build_cmd->add_option("--synonyms", build.synonyms)->check(CLI::ExistingFile);
    build_cmd->add_option("--equiv", build.equiv)->check(CLI::ExistingFile);
    build_cmd->add_option("--types", build.types)->check(CLI::ExistingFile);
    build_cmd->add_option("--out", build.out)->required();
    build_cmd->add_option("--default-weight", build.default_weight)->check(CLI::Range(0.0, 1.0));

    QueryArgs q;
    auto* query_cmd = app.add_subcommand("query", "answer one annotated or raw query");
    engine_options(query_cmd, q.engine);
    query_cmd->add_option("--annotated", q.annotated, "CoNLL-U file")->check(CLI::ExistingFile);
    query_cmd->add_option("--text", q.text, "raw query text (needs an annotator)");
    query_cmd->add_option("--annotator-url", q.annotator_url);
    query_cmd->add_option("--at", q.at, "activation threshold");
    query_cmd->add_option("--df", q.df, "decay factor");
    query_cmd->add_option("--st", q.st, "maximum spreading rounds");
    query_cmd->add_option("--combine", q.combine)->check(CLI::IsMember({"intersection", "union"}));
    query_cmd->add_option("--seed", q.seed, "shuffle seed for same-layer order");
    query_cmd->add_flag("--json", q.json, "print the service response body");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "train on a split of a dataset and report held-out metrics");
    eval_cmd->add_option("--dataset", ev.dataset)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--model-kind", ev.kind)->check(CLI::IsMember({"mlp", "logistic", "gaussian-bayes"}));
    eval_cmd->add_option("--seed", ev.seed);
    eval_cmd->add_option("--split-seed", ev.split_seed);
    eval_cmd->add_option("--test-fraction", ev.test_fraction)->check(CLI::Range(0.05, 0.95));
    eval_cmd->add_option("--mse", ev.mse)->check(CLI::IsMember({"positives", "all"}));

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train a decision model and save it");
    train_cmd->add_option("--dataset", tr.dataset)->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--model-kind", tr.kind)->check(CLI::IsMember({"mlp", "logistic", "gaussian-bayes"}));
    train_cmd->add_option("--out", tr.out)->required();
    train_cmd->add_option("--seed", tr.seed);
    train_cmd->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-dataset", "write a synthetic feature dataset");
    gen_cmd->add_option("--n", gen.n)->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed);
    gen_cmd->add_option("--out", gen.out, "output CSV, '-' for stdout");

    ServeArgs sv;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
    engine_options(serve_cmd, sv.engine);
    serve_cmd->add_option("--port", sv.port, "overridden by KGQA_PORT");
    serve_cmd->add_option("--host", sv.host);
    serve_cmd->add_option("--annotator-url", sv.annotator_url);
    serve_cmd->add_option("--allow-origin", sv.origin, "CORS origin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*build_cmd) return build_kg(build);
        if (*query_cmd) return query(q);
        if (*eval_cmd) return eval(ev);
        if (*train_cmd) return train(tr);
        if (*gen_cmd) return gen_dataset(gen);
        if (*serve_cmd) return serve(sv);
    } catch (const Error& e) {
        std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
