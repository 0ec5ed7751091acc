// Command-line driver: synthesize corpora, compute salience maps, train
// classifiers, evaluate faithfulness, and compare reports.
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "saloss/attribution.hpp"
#include "saloss/data.hpp"
#include "saloss/evaluation.hpp"
#include "saloss/model.hpp"
#include "saloss/salience.hpp"
#include "saloss/stats.hpp"
#include "saloss/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saloss;

namespace {

constexpr const char* kToolVersion = "0.1.0";

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("SALOSS_LOG");
        if (env == nullptr) return 1;
        const std::string v(env);
        if (v == "error") return 0;
        if (v == "debug") return 2;
        return 1;  // info
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[debug] " << msg << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// --dataset accepts either a directory holding train/dev/test.jsonl or a
/// single JSONL file split 70/10/20 in order.
DataSplits load_splits(const std::string& dataset) {
    DataSplits splits;
    if (fs::is_directory(dataset)) {
        splits.train = load_jsonl((fs::path(dataset) / "train.jsonl").string());
        splits.dev = load_jsonl((fs::path(dataset) / "dev.jsonl").string());
        splits.test = load_jsonl((fs::path(dataset) / "test.jsonl").string());
        return splits;
    }
    auto docs = load_jsonl(dataset);
    const std::size_t n = docs.size();
    const std::size_t n_train = n * 7 / 10;
    const std::size_t n_dev = n / 10;
    splits.train.assign(docs.begin(), docs.begin() + n_train);
    splits.dev.assign(docs.begin() + n_train, docs.begin() + n_train + n_dev);
    splits.test.assign(docs.begin() + n_train + n_dev, docs.end());
    return splits;
}

int infer_num_classes(const DataSplits& splits) {
    int max_label = 0;
    for (const auto* split : {&splits.train, &splits.dev, &splits.test}) {
        for (const auto& doc : *split) max_label = std::max(max_label, doc.label);
    }
    return max_label + 1;
}

void write_manifest(const fs::path& out_dir, const json& config,
                    const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& artifacts) {
    json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["config"] = config;
    manifest["config_hash"] = [&] {
        std::ostringstream hex;
        hex << std::hex << std::hash<std::string>{}(config.dump());
        return hex.str();
    }();
    manifest["seeds"] = seeds;
    manifest["artifacts"] = artifacts;
    for (const auto& artifact : artifacts) {
        if (!fs::exists(artifact)) {
            throw DataError("manifest references missing artifact " + artifact);
        }
    }
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

struct SynthOptions {
    std::string out;
    std::size_t docs = 200;
    std::size_t vocab = 50;
    std::size_t seq_len = 20;
    int classes = 2;
    std::size_t keywords_per_class = 2;
    double distractor_rate = 1.0;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthOptions& opt) {
    SyntheticSpec spec;
    spec.num_docs = opt.docs;
    spec.vocab_size = opt.vocab;
    spec.seq_len = opt.seq_len;
    spec.num_classes = opt.classes;
    spec.distractor_rate = opt.distractor_rate;
    spec.seed = opt.seed;
    for (int c = 0; c < opt.classes; ++c) {
        std::vector<std::string> kws;
        for (std::size_t j = 0; j < opt.keywords_per_class; ++j) {
            kws.push_back("k" + std::to_string(c) + "w" + std::to_string(j));
        }
        spec.keywords_per_class.push_back(std::move(kws));
    }
    auto splits = make_synthetic_corpus(spec);
    fs::create_directories(opt.out);
    const fs::path out(opt.out);
    save_jsonl(splits.train, (out / "train.jsonl").string());
    save_jsonl(splits.dev, (out / "dev.jsonl").string());
    save_jsonl(splits.test, (out / "test.jsonl").string());
    json config = {{"command", "synth"},       {"docs", opt.docs},
                   {"vocab", opt.vocab},       {"seq_len", opt.seq_len},
                   {"classes", opt.classes},   {"seed", opt.seed},
                   {"keywords_per_class", opt.keywords_per_class},
                   {"distractor_rate", opt.distractor_rate}};
    write_manifest(out, config, {opt.seed},
                   {(out / "train.jsonl").string(),
                    (out / "dev.jsonl").string(),
                    (out / "test.jsonl").string()});
    log_info("wrote synthetic corpus to " + opt.out);
    return 0;
}

struct SalienceOptions {
    std::string dataset;
    std::string method = "textrank";
    std::string out;
    std::size_t window = 4;
    std::size_t iters = 10;
};

int cmd_salience(const SalienceOptions& opt) {
    auto splits = load_splits(opt.dataset);
    TextRankConfig cfg;
    cfg.window = opt.window;
    cfg.max_iters = opt.iters;
    DfTable df;
    Chi2Table chi2;
    if (opt.method == "tfidf") df = DfTable::build(splits.train);
    if (opt.method == "chi2") {
        chi2 = Chi2Table::build(splits.train, infer_num_classes(splits));
    }
    std::vector<SalienceMap> maps;
    for (const auto* split : {&splits.train, &splits.dev, &splits.test}) {
        for (const auto& doc : *split) {
            maps.push_back(compute_salience(doc, opt.method, cfg, &df, &chi2));
        }
    }
    fs::create_directories(opt.out);
    const fs::path out(opt.out);
    save_salience_jsonl(maps, (out / "salience.jsonl").string());
    json config = {{"command", "salience"}, {"dataset", opt.dataset},
                   {"method", opt.method},  {"window", cfg.window},
                   {"damping", cfg.damping}, {"iters", cfg.max_iters},
                   {"tol", cfg.tol}};
    write_manifest(out, config, {}, {(out / "salience.jsonl").string()});
    log_info("wrote " + std::to_string(maps.size()) + " salience maps to " +
             opt.out);
    return 0;
}

struct TrainOptions {
    std::string dataset;
    std::string salience;
    std::string out;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double lr_head = 1e-2;
    std::size_t layers = 1;
    std::size_t heads = 2;
    std::size_t d_model = 32;
    std::size_t d_ff = 64;
    std::size_t max_len = 64;
};

ModelConfig model_config_from(const TrainOptions& opt, std::size_t vocab_size,
                              int num_classes) {
    ModelConfig mc;
    mc.num_layers = opt.layers;
    mc.num_heads = opt.heads;
    mc.d_model = opt.d_model;
    mc.d_ff = opt.d_ff;
    mc.vocab_size = vocab_size;
    mc.max_len = opt.max_len;
    mc.num_classes = static_cast<std::size_t>(num_classes);
    return mc;
}

TrainConfig train_config_from(const TrainOptions& opt) {
    TrainConfig tc;
    tc.lambda = opt.lambda;
    tc.seed = opt.seed;
    tc.epochs = opt.epochs;
    tc.batch_size = opt.batch_size;
    tc.lr_model = opt.lr;
    tc.lr_head = opt.lr_head;
    return tc;
}

int cmd_train(const TrainOptions& opt) {
    auto splits = load_splits(opt.dataset);
    auto vocab = Vocabulary::build(splits.train);
    ModelConfig mc =
        model_config_from(opt, vocab.size(), infer_num_classes(splits));
    TrainConfig tc = train_config_from(opt);

    SalienceTable table;
    if (!opt.salience.empty()) {
        table = salience_table(load_salience_jsonl(opt.salience));
    } else if (tc.lambda > 0.0) {
        throw UsageError("--lambda > 0 requires --salience");
    }

    Model model(mc, tc.seed);
    log_info("training: lambda=" + std::to_string(tc.lambda) + " seed=" +
             std::to_string(tc.seed));
    auto result = fit(model, splits.train, splits.dev, vocab, tc,
                      tc.lambda > 0.0 ? &table : nullptr);

    fs::create_directories(opt.out);
    const fs::path out(opt.out);
    model.save((out / "checkpoint.json").string());
    json metrics = json::array();
    for (const auto& m : result.metrics) {
        metrics.push_back({{"epoch", m.epoch},
                           {"l_c", m.l_c},
                           {"l_sal", m.l_sal},
                           {"dev_f1", m.dev_f1}});
        log_debug("epoch " + std::to_string(m.epoch) + " l_c " +
                  std::to_string(m.l_c) + " l_sal " + std::to_string(m.l_sal) +
                  " dev_f1 " + std::to_string(m.dev_f1));
    }
    json metrics_obj = {{"epochs", metrics},
                        {"best_epoch", result.best_epoch},
                        {"best_dev_f1", result.best_dev_f1}};
    write_text(out / "metrics.json", metrics_obj.dump(2) + "\n");
    json config = {{"command", "train"},     {"dataset", opt.dataset},
                   {"salience", opt.salience}, {"lambda", opt.lambda},
                   {"seed", opt.seed},       {"epochs", opt.epochs},
                   {"batch_size", opt.batch_size}, {"lr", opt.lr},
                   {"lr_head", opt.lr_head}, {"layers", opt.layers},
                   {"heads", opt.heads},     {"d_model", opt.d_model},
                   {"d_ff", opt.d_ff},       {"max_len", opt.max_len}};
    write_manifest(out, config, {opt.seed},
                   {(out / "checkpoint.json").string(),
                    (out / "metrics.json").string()});
    log_info("best dev macro-F1 " + std::to_string(result.best_dev_f1) +
             " at epoch " + std::to_string(result.best_epoch));
    return 0;
}

struct EvaluateOptions {
    std::string checkpoint;
    std::string dataset;
    std::string out;
    std::vector<std::string> methods;
    std::vector<std::string> modes;
    std::string thresholder = "topk";
    double ratio = 0.2;
    double step = 0.05;
    int ig_steps = 50;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double lr_head = 1e-2;
};

MethodErasure erase_with_method(const Model& model, const std::string& method,
                                const std::vector<Document>& docs,
                                const Vocabulary& vocab,
                                const EvaluateOptions& opt) {
    MethodErasure result;
    result.method = method;
    result.count = docs.size();
    result.per_doc.resize(docs.size());

    auto worker = [&](const Model& m, std::size_t begin, std::size_t end) {
        auto predict = model_predictor(m, vocab);
        std::mt19937_64 rand_rng(opt.seed);
        for (std::size_t i = begin; i < end; ++i) {
            AttributionScores scores;
            if (method == "rand") {
                // seeded per-doc so the ranking is independent of chunking
                std::mt19937_64 doc_rng(opt.seed ^
                                        std::hash<std::string>{}(docs[i].id));
                scores.doc_id = docs[i].id;
                scores.method = "rand";
                const std::size_t t =
                    truncate_tokens(docs[i].tokens, m.config().max_len).size();
                scores.scores.resize(t);
                for (auto& s : scores.scores) {
                    s = std::uniform_real_distribution<double>(0.0, 1.0)(
                        doc_rng);
                }
            } else {
                scores = attribute(m, docs[i], vocab, method, opt.ig_steps);
            }
            result.per_doc[i] =
                decision_flip_fraction(predict, docs[i], scores, opt.step);
        }
    };

    if (opt.jobs <= 1 || docs.size() < 2) {
        worker(model, 0, docs.size());
    } else {
        // each thread works on its own model copy; parameter tensors hold
        // gradient state so a shared instance is not safe across threads
        const std::size_t jobs = std::min(opt.jobs, docs.size());
        std::vector<Model> copies;
        copies.reserve(jobs);
        for (std::size_t j = 0; j < jobs; ++j) {
            copies.push_back(Model::load(opt.checkpoint));
        }
        std::vector<std::thread> threads;
        const std::size_t chunk = (docs.size() + jobs - 1) / jobs;
        for (std::size_t j = 0; j < jobs; ++j) {
            const std::size_t begin = j * chunk;
            const std::size_t end = std::min(docs.size(), begin + chunk);
            if (begin >= end) break;
            threads.emplace_back(worker, std::cref(copies[j]), begin, end);
        }
        for (auto& t : threads) t.join();
    }

    double total = 0.0;
    std::size_t no_flip = 0;
    for (const auto& r : result.per_doc) {
        total += r.flip_fraction;
        if (!r.flipped) ++no_flip;
    }
    result.mean_fraction = total / static_cast<double>(docs.size());
    result.no_flip_rate =
        static_cast<double>(no_flip) / static_cast<double>(docs.size());
    return result;
}

int cmd_evaluate(const EvaluateOptions& opt) {
    auto splits = load_splits(opt.dataset);
    auto vocab = Vocabulary::build(splits.train);
    Model model = Model::load(opt.checkpoint);

    std::vector<std::string> methods = opt.methods;
    if (methods.empty()) methods = attribution_methods();
    std::vector<std::string> modes = opt.modes;
    if (modes.empty()) modes = {"erase"};

    EvalReport report;
    report.dataset = opt.dataset;

    for (const auto& mode : modes) {
        if (mode == "erase") {
            for (const auto& method : methods) {
                log_info("erasure with " + method);
                report.erasure.push_back(
                    erase_with_method(model, method, splits.test, vocab, opt));
            }
            log_info("erasure with random ranking baseline");
            report.erasure.push_back(
                erase_with_method(model, "rand", splits.test, vocab, opt));
        } else if (mode == "fresh") {
            TrainOptions tr;
            tr.epochs = opt.epochs;
            tr.batch_size = opt.batch_size;
            tr.lr = opt.lr;
            tr.lr_head = opt.lr_head;
            tr.seed = opt.seed;
            TrainConfig tc = train_config_from(tr);
            for (const auto& method : methods) {
                log_info("fresh rationale classifier with " + method);
                FreshSpec spec;
                spec.method = method;
                spec.thresholder = opt.thresholder;
                spec.ratio = opt.ratio;
                spec.ig_steps = opt.ig_steps;
                const double f1 = fresh_run(model, vocab, splits, spec,
                                            model.config(), tc);
                report.fresh.push_back(
                    {method, opt.thresholder, opt.ratio, f1});
            }
        } else if (mode == "pos") {
            for (const auto& doc : splits.test) {
                if (!doc.has_pos_tags()) {
                    throw DataError("pos mode requires pos_tags; doc " +
                                    doc.id + " has none");
                }
            }
            // aggregated over the first requested method
            std::vector<Document> truncated;
            std::vector<AttributionScores> attrs;
            for (const auto& doc : splits.test) {
                Document t = doc;
                t.tokens = truncate_tokens(doc.tokens, model.config().max_len);
                t.pos_tags.resize(t.tokens.size());
                truncated.push_back(std::move(t));
                attrs.push_back(attribute(model, doc, vocab, methods.front(),
                                          opt.ig_steps));
            }
            report.pos = pos_importance(truncated, attrs);
        } else {
            throw UsageError("unknown mode \"" + mode +
                             "\" (expected erase, fresh, or pos)");
        }
    }

    fs::create_directories(opt.out);
    const fs::path out(opt.out);
    write_text(out / "report.json", report_to_json(report) + "\n");
    std::cout << render_report_tables(report);
    json config = {{"command", "evaluate"},  {"checkpoint", opt.checkpoint},
                   {"dataset", opt.dataset}, {"methods", methods},
                   {"modes", modes},         {"thresholder", opt.thresholder},
                   {"ratio", opt.ratio},     {"step", opt.step},
                   {"ig_steps", opt.ig_steps}, {"seed", opt.seed},
                   {"jobs", opt.jobs}};
    write_manifest(out, config, {opt.seed}, {(out / "report.json").string()});
    return 0;
}

struct CompareOptions {
    std::string report_a;
    std::string report_b;
    std::string test = "wilcoxon";
    std::string out;
};

int cmd_compare(const CompareOptions& opt) {
    auto a = report_from_json(read_text(opt.report_a));
    auto b = report_from_json(read_text(opt.report_b));
    if (a.dataset != b.dataset) {
        throw DataError("reports cover different datasets: " + a.dataset +
                        " vs " + b.dataset);
    }
    json rows = json::array();
    std::printf("%-24s %12s %12s %6s\n", "method", "statistic", "p_value",
                "sig");
    for (const auto& ma : a.erasure) {
        const MethodErasure* mb = nullptr;
        for (const auto& m : b.erasure) {
            if (m.method == ma.method) mb = &m;
        }
        if (mb == nullptr) {
            std::cerr << "[warn] method " << ma.method
                      << " missing from second report; row omitted\n";
            continue;
        }
        std::vector<double> sa, sb;
        for (const auto& r : ma.per_doc) sa.push_back(r.flip_fraction);
        for (const auto& r : mb->per_doc) sb.push_back(r.flip_fraction);
        TestResult tr = opt.test == "ttest" ? t_test_two_sample(sa, sb)
                                            : wilcoxon_rank_sum(sa, sb);
        const bool significant = tr.p_value < 0.05;
        std::printf("%-24s %12.4f %12.6f %6s\n", ma.method.c_str(),
                    tr.statistic, tr.p_value, significant ? "yes" : "no");
        rows.push_back({{"method", ma.method},
                        {"statistic", tr.statistic},
                        {"p_value", tr.p_value},
                        {"significant", significant}});
    }
    if (!opt.out.empty()) {
        fs::create_directories(opt.out);
        const fs::path out(opt.out);
        json obj = {{"test", opt.test},
                    {"dataset", a.dataset},
                    {"rows", rows}};
        write_text(out / "compare.json", obj.dump(2) + "\n");
        json config = {{"command", "compare"}, {"report_a", opt.report_a},
                       {"report_b", opt.report_b}, {"test", opt.test}};
        write_manifest(out, config, {}, {(out / "compare.json").string()});
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SaLoss text classification and faithfulness toolkit"};
    app.require_subcommand(1);

    SynthOptions synth;
    auto* synth_cmd =
        app.add_subcommand("synth", "Generate a planted-keyword corpus");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_option("--docs", synth.docs, "Number of documents");
    synth_cmd->add_option("--vocab", synth.vocab, "Distractor vocabulary size");
    synth_cmd->add_option("--seq-len", synth.seq_len, "Tokens per document");
    synth_cmd->add_option("--classes", synth.classes, "Number of classes");
    synth_cmd->add_option("--keywords-per-class", synth.keywords_per_class,
                          "Keywords per class");
    synth_cmd->add_option("--distractor-rate", synth.distractor_rate,
                          "Probability a free slot draws a distractor");
    synth_cmd->add_option("--seed", synth.seed, "Random seed");

    SalienceOptions sal;
    auto* sal_cmd =
        app.add_subcommand("salience", "Compute per-token salience maps");
    sal_cmd->add_option("--dataset", sal.dataset, "Corpus path")->required();
    sal_cmd->add_option("--method", sal.method,
                        "textrank | tfidf | chi2 | uniform");
    sal_cmd->add_option("--window", sal.window, "Co-occurrence window");
    sal_cmd->add_option("--iters", sal.iters, "Iteration cap");
    sal_cmd->add_option("--out", sal.out, "Output directory")->required();

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train a classifier");
    train_cmd->add_option("--dataset", train.dataset, "Corpus path")
        ->required();
    train_cmd->add_option("--salience", train.salience,
                          "Salience JSONL (required when --lambda > 0)");
    train_cmd->add_option("--lambda", train.lambda,
                          "Salience regularizer weight");
    train_cmd->add_option("--seed", train.seed, "Random seed");
    train_cmd->add_option("--epochs", train.epochs, "Training epochs");
    train_cmd->add_option("--batch-size", train.batch_size, "Batch size");
    train_cmd->add_option("--lr", train.lr, "Encoder learning rate");
    train_cmd->add_option("--lr-head", train.lr_head, "Head learning rate");
    train_cmd->add_option("--layers", train.layers, "Encoder layers");
    train_cmd->add_option("--heads", train.heads, "Attention heads");
    train_cmd->add_option("--d-model", train.d_model, "Model width");
    train_cmd->add_option("--d-ff", train.d_ff, "Feed-forward width");
    train_cmd->add_option("--max-len", train.max_len, "Maximum sequence length");
    train_cmd->add_option("--out", train.out, "Output directory")->required();

    EvaluateOptions eval;
    auto* eval_cmd =
        app.add_subcommand("evaluate", "Run faithfulness evaluation");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint path")
        ->required();
    eval_cmd->add_option("--dataset", eval.dataset, "Corpus path")->required();
    eval_cmd
        ->add_option("--method", eval.methods,
                     "alpha | alpha_grad | input_x_grad | ig (repeatable; "
                     "default all)")
        ->delimiter(',');
    eval_cmd
        ->add_option("--mode", eval.modes,
                     "erase | fresh | pos (repeatable; default erase)")
        ->delimiter(',');
    eval_cmd->add_option("--thresholder", eval.thresholder,
                         "topk | contiguous");
    eval_cmd->add_option("--ratio", eval.ratio, "Rationale length ratio");
    eval_cmd->add_option("--step", eval.step, "Erasure step fraction");
    eval_cmd->add_option("--ig-steps", eval.ig_steps,
                         "Integrated-gradients steps");
    eval_cmd->add_option("--seed", eval.seed, "Random seed");
    eval_cmd->add_option("--jobs", eval.jobs,
                         "Parallel workers for per-document evaluation");
    eval_cmd->add_option("--epochs", eval.epochs,
                         "Epochs for the fresh rationale classifier");
    eval_cmd->add_option("--batch-size", eval.batch_size,
                         "Batch size for the fresh rationale classifier");
    eval_cmd->add_option("--lr", eval.lr, "Fresh classifier encoder rate");
    eval_cmd->add_option("--lr-head", eval.lr_head, "Fresh classifier head rate");
    eval_cmd->add_option("--out", eval.out, "Output directory")->required();

    CompareOptions cmp;
    auto* cmp_cmd =
        app.add_subcommand("compare", "Significance-test two reports");
    cmp_cmd->add_option("report_a", cmp.report_a, "First report.json")
        ->required();
    cmp_cmd->add_option("report_b", cmp.report_b, "Second report.json")
        ->required();
    cmp_cmd->add_option("--test", cmp.test, "wilcoxon | ttest");
    cmp_cmd->add_option("--out", cmp.out, "Optional output directory");

    try {
        app.parse(argc, argv);
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (sal_cmd->parsed()) return cmd_salience(sal);
        if (train_cmd->parsed()) return cmd_train(train);
        if (eval_cmd->parsed()) return cmd_evaluate(eval);
        if (cmp_cmd->parsed()) return cmd_compare(cmp);
        throw UsageError("no subcommand given");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
