#include "saloss/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

namespace saloss {

using nlohmann::json;

TokenPredictor model_predictor(const Model& model, const Vocabulary& vocab) {
    const std::size_t max_len = model.config().max_len;
    return [&model, &vocab, max_len](const std::vector<std::string>& tokens) {
        return model.predict(encode(tokens, vocab, max_len));
    };
}

namespace {

// positions sorted by descending score, ties to the earlier position
std::vector<std::size_t> rank_positions(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return scores[a] > scores[b];
                     });
    return order;
}

}  // namespace

ErasureResult decision_flip_fraction(const TokenPredictor& predict,
                                     const Document& doc,
                                     const AttributionScores& scores,
                                     double step) {
    if (step <= 0.0 || step > 1.0) {
        throw UsageError("decision_flip_fraction: step must be in (0, 1]");
    }
    const std::size_t t = scores.scores.size();
    if (t == 0) {
        throw DataError("decision_flip_fraction: document " + doc.id +
                        " has no content tokens");
    }
    if (t > doc.tokens.size()) {
        throw DataError("decision_flip_fraction: scores longer than doc " +
                        doc.id);
    }
    // scores cover the (possibly truncated) first t tokens
    const std::vector<std::string> tokens(doc.tokens.begin(),
                                          doc.tokens.begin() +
                                              static_cast<long>(t));
    const int original = predict(tokens);
    const auto order = rank_positions(scores.scores);

    ErasureResult result;
    result.doc_id = doc.id;
    result.method = scores.method;
    for (std::size_t k = 1;; ++k) {
        const double fraction = static_cast<double>(k) * step;
        const std::size_t budget = std::min(
            t, static_cast<std::size_t>(
                   std::ceil(fraction * static_cast<double>(t) - 1e-12)));
        std::vector<bool> removed(t, false);
        for (std::size_t i = 0; i < budget; ++i) removed[order[i]] = true;
        std::vector<std::string> kept;
        for (std::size_t i = 0; i < t; ++i) {
            if (!removed[i]) kept.push_back(tokens[i]);
        }
        if (predict(kept) != original) {
            result.flip_fraction = std::min(1.0, fraction);
            result.flipped = true;
            return result;
        }
        if (fraction >= 1.0) break;
    }
    result.flip_fraction = 1.0;
    result.flipped = false;
    return result;
}

RationaleSet topk_rationale(const AttributionScores& scores, double ratio) {
    if (ratio <= 0.0 || ratio > 1.0) {
        throw UsageError("topk_rationale: ratio must be in (0, 1]");
    }
    const std::size_t t = scores.scores.size();
    if (t == 0) throw DataError("topk_rationale: empty scores");
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(t) - 1e-12));
    auto order = rank_positions(scores.scores);
    order.resize(k);
    std::sort(order.begin(), order.end());
    RationaleSet set;
    set.doc_id = scores.doc_id;
    set.thresholder = "topk";
    set.ratio = ratio;
    set.positions = std::move(order);
    return set;
}

RationaleSet contiguous_rationale(const AttributionScores& scores,
                                  double ratio) {
    if (ratio <= 0.0 || ratio > 1.0) {
        throw UsageError("contiguous_rationale: ratio must be in (0, 1]");
    }
    const std::size_t t = scores.scores.size();
    if (t == 0) throw DataError("contiguous_rationale: empty scores");
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(t) - 1e-12));
    double window_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) window_sum += scores.scores[i];
    double best_sum = window_sum;
    std::size_t best_start = 0;
    for (std::size_t start = 1; start + k <= t; ++start) {
        window_sum += scores.scores[start + k - 1] - scores.scores[start - 1];
        if (window_sum > best_sum + 1e-15) {
            best_sum = window_sum;
            best_start = start;
        }
    }
    RationaleSet set;
    set.doc_id = scores.doc_id;
    set.thresholder = "contiguous";
    set.ratio = ratio;
    for (std::size_t i = 0; i < k; ++i) set.positions.push_back(best_start + i);
    return set;
}

double f1_macro(const std::vector<int>& predictions,
                const std::vector<int>& labels, int num_classes) {
    if (predictions.empty() || predictions.size() != labels.size()) {
        throw DataError("f1_macro: empty or mismatched inputs");
    }
    if (num_classes < 1) throw DataError("f1_macro: invalid class count");
    double total = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        double tp = 0.0, fp = 0.0, fn = 0.0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            const bool predicted = predictions[i] == c;
            const bool actual = labels[i] == c;
            if (predicted && actual) tp += 1.0;
            if (predicted && !actual) fp += 1.0;
            if (!predicted && actual) fn += 1.0;
        }
        const double denom = 2.0 * tp + fp + fn;
        total += denom == 0.0 ? 0.0 : 2.0 * tp / denom;
    }
    return total / static_cast<double>(num_classes);
}

double fresh_run(const Model& support, const Vocabulary& support_vocab,
                 const DataSplits& splits, const FreshSpec& spec,
                 const ModelConfig& classifier_cfg,
                 const TrainConfig& classifier_train_cfg) {
    auto extract_split = [&](const std::vector<Document>& docs) {
        std::vector<Document> rationales;
        rationales.reserve(docs.size());
        for (const auto& doc : docs) {
            auto scores = attribute(support, doc, support_vocab, spec.method,
                                    spec.ig_steps);
            RationaleSet set = spec.thresholder == "contiguous"
                                   ? contiguous_rationale(scores, spec.ratio)
                                   : topk_rationale(scores, spec.ratio);
            if (set.positions.empty()) {
                throw DataError("fresh_run: empty rationale for doc " +
                                doc.id);
            }
            Document rationale;
            rationale.id = doc.id;
            rationale.label = doc.label;
            for (std::size_t p : set.positions) {
                rationale.tokens.push_back(doc.tokens[p]);
            }
            rationales.push_back(std::move(rationale));
        }
        return rationales;
    };

    DataSplits rationale_splits;
    rationale_splits.train = extract_split(splits.train);
    rationale_splits.dev = extract_split(splits.dev);
    rationale_splits.test = extract_split(splits.test);

    auto vocab = Vocabulary::build(rationale_splits.train);
    ModelConfig cfg = classifier_cfg;
    cfg.vocab_size = vocab.size();
    TrainConfig train_cfg = classifier_train_cfg;
    train_cfg.lambda = 0.0;  // the classifier always trains plain
    Model classifier(cfg, train_cfg.seed);
    fit(classifier, rationale_splits.train, rationale_splits.dev, vocab,
        train_cfg);

    std::vector<int> preds, labels;
    for (const auto& doc : rationale_splits.test) {
        preds.push_back(
            classifier.predict(encode(doc.tokens, vocab, cfg.max_len)));
        labels.push_back(doc.label);
    }
    return f1_macro(preds, labels, static_cast<int>(cfg.num_classes));
}

std::map<std::string, PosStat> pos_importance(
    const std::vector<Document>& docs,
    const std::vector<AttributionScores>& attributions) {
    std::unordered_map<std::string, const AttributionScores*> by_id;
    for (const auto& attr : attributions) by_id[attr.doc_id] = &attr;
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& doc : docs) {
        auto it = by_id.find(doc.id);
        if (it == by_id.end()) continue;
        if (!doc.has_pos_tags()) {
            throw DataError("pos_importance: doc " + doc.id +
                            " carries no pos_tags");
        }
        if (doc.pos_tags.size() != doc.tokens.size() ||
            it->second->scores.size() != doc.tokens.size()) {
            throw DataError("pos_importance: tag/score length mismatch for "
                            "doc " + doc.id);
        }
        for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
            auto& acc = sums[doc.pos_tags[i]];
            acc.first += it->second->scores[i];
            acc.second += 1;
        }
    }
    std::map<std::string, PosStat> out;
    for (const auto& [tag, acc] : sums) {
        out[tag] = {acc.first / static_cast<double>(acc.second), acc.second};
    }
    return out;
}

std::string report_to_json(const EvalReport& report) {
    json obj;
    obj["dataset"] = report.dataset;
    json erasure = json::array();
    for (const auto& m : report.erasure) {
        json entry;
        entry["method"] = m.method;
        entry["mean_fraction"] = m.mean_fraction;
        entry["no_flip_rate"] = m.no_flip_rate;
        entry["count"] = m.count;
        json per_doc = json::array();
        for (const auto& r : m.per_doc) {
            per_doc.push_back({{"id", r.doc_id},
                               {"fraction", r.flip_fraction},
                               {"flipped", r.flipped}});
        }
        entry["per_doc"] = std::move(per_doc);
        erasure.push_back(std::move(entry));
    }
    obj["erasure"] = std::move(erasure);
    json fresh = json::array();
    for (const auto& f : report.fresh) {
        fresh.push_back({{"method", f.method},
                         {"thresholder", f.thresholder},
                         {"ratio", f.ratio},
                         {"f1", f.f1}});
    }
    obj["fresh"] = std::move(fresh);
    json pos = json::object();
    for (const auto& [tag, stat] : report.pos) {
        pos[tag] = {{"mean", stat.mean}, {"count", stat.count}};
    }
    obj["pos"] = std::move(pos);
    return obj.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    json obj;
    try {
        obj = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("report_from_json: ") + e.what());
    }
    EvalReport report;
    report.dataset = obj.at("dataset").get<std::string>();
    for (const auto& entry : obj.at("erasure")) {
        MethodErasure m;
        m.method = entry.at("method").get<std::string>();
        m.mean_fraction = entry.at("mean_fraction").get<double>();
        m.no_flip_rate = entry.at("no_flip_rate").get<double>();
        m.count = entry.at("count").get<std::size_t>();
        for (const auto& r : entry.at("per_doc")) {
            m.per_doc.push_back({r.at("id").get<std::string>(), m.method,
                                 r.at("fraction").get<double>(),
                                 r.at("flipped").get<bool>()});
        }
        report.erasure.push_back(std::move(m));
    }
    for (const auto& f : obj.at("fresh")) {
        report.fresh.push_back({f.at("method").get<std::string>(),
                                f.at("thresholder").get<std::string>(),
                                f.at("ratio").get<double>(),
                                f.at("f1").get<double>()});
    }
    if (obj.contains("pos")) {
        for (const auto& [tag, stat] : obj.at("pos").items()) {
            report.pos[tag] = {stat.at("mean").get<double>(),
                               stat.at("count").get<std::size_t>()};
        }
    }
    return report;
}

std::string render_report_tables(const EvalReport& report) {
    std::string out;
    char buf[160];
    if (!report.erasure.empty()) {
        out += "Erasure: mean fraction of tokens removed to flip the "
               "decision (lower = more faithful)\n";
        snprintf(buf, sizeof(buf), "%-24s %12s %12s %8s\n", "method",
                 "mean_frac", "no_flip", "n");
        out += buf;
        for (const auto& m : report.erasure) {
            snprintf(buf, sizeof(buf), "%-24s %12.4f %12.4f %8zu\n",
                     m.method.c_str(), m.mean_fraction, m.no_flip_rate,
                     m.count);
            out += buf;
        }
        out += "\n";
    }
    if (!report.fresh.empty()) {
        out += "FRESH: macro-F1 of a classifier trained on extracted "
               "rationales (higher = more faithful)\n";
        snprintf(buf, sizeof(buf), "%-24s %-12s %8s %10s\n", "method",
                 "thresholder", "ratio", "f1");
        out += buf;
        for (const auto& f : report.fresh) {
            snprintf(buf, sizeof(buf), "%-24s %-12s %8.2f %10.4f\n",
                     f.method.c_str(), f.thresholder.c_str(), f.ratio, f.f1);
            out += buf;
        }
        out += "\n";
    }
    if (!report.pos.empty()) {
        out += "Mean importance by PoS tag\n";
        snprintf(buf, sizeof(buf), "%-12s %12s %8s\n", "tag", "mean", "n");
        out += buf;
        for (const auto& [tag, stat] : report.pos) {
            snprintf(buf, sizeof(buf), "%-12s %12.4f %8zu\n", tag.c_str(),
                     stat.mean, stat.count);
            out += buf;
        }
    }
    return out;
}

}  // namespace saloss
