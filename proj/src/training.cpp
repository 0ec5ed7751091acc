#include "saloss/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "saloss/evaluation.hpp"

namespace saloss {

SalienceTable salience_table(const std::vector<SalienceMap>& maps) {
    SalienceTable table;
    for (const auto& map : maps) table[map.doc_id] = map.scores;
    return table;
}

Tensor kl_salience_loss(const Tensor& alpha, const std::vector<double>& sigma) {
    if (alpha.shape().size() != 1 || alpha.size() != sigma.size()) {
        throw ShapeError("kl_salience_loss: alpha length " +
                         std::to_string(alpha.size()) + " vs sigma " +
                         std::to_string(sigma.size()));
    }
    std::vector<double> log_sigma(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (sigma[i] <= 0.0) {
            throw NumericError(
                "kl_salience_loss: sigma has a zero entry (normalize "
                "upstream)");
        }
        log_sigma[i] = std::log(sigma[i]);
    }
    Tensor log_sigma_t = Tensor::from({sigma.size()}, std::move(log_sigma));
    return sum(mul(alpha, sub(log_elem(alpha), log_sigma_t)));
}

JointLoss joint_loss(const Tensor& logits, int label, const AlphaVector& alpha,
                     const std::vector<double>& sigma, double lambda) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw DataError("joint_loss: label " + std::to_string(label) +
                        " outside class range");
    }
    JointLoss result;
    Tensor ce = cross_entropy_logits(logits, static_cast<std::size_t>(label));
    result.breakdown.l_c = ce.value();
    if (lambda == 0.0) {
        result.total = ce;
        result.breakdown.l_sal = 0.0;
        result.breakdown.l_total = result.breakdown.l_c;
        return result;
    }
    Tensor kl = kl_salience_loss(alpha.weights, sigma);
    result.breakdown.l_sal = kl.value();
    result.total = add(ce, scale(kl, lambda));
    result.breakdown.l_total = result.total.value();
    return result;
}

std::vector<double> salience_target(const Document& doc,
                                    const SalienceTable& table,
                                    std::size_t max_len) {
    auto it = table.find(doc.id);
    if (it == table.end()) {
        throw DataError("salience missing for doc id " + doc.id);
    }
    const std::size_t content_len =
        truncate_tokens(doc.tokens, max_len).size();
    if (it->second.size() < content_len) {
        throw DataError("salience for doc " + doc.id + " covers " +
                        std::to_string(it->second.size()) + " tokens, need " +
                        std::to_string(content_len));
    }
    SalienceMap map;
    map.doc_id = doc.id;
    map.scores.assign(it->second.begin(),
                      it->second.begin() + static_cast<long>(content_len));
    return normalize_salience(std::move(map)).scores;
}

namespace {

struct AdamW {
    double lr;
    double weight_decay;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<std::vector<double>> m, v;

    explicit AdamW(const std::vector<std::pair<std::string, Tensor>>& params,
                   double lr_, double weight_decay_)
        : lr(lr_), weight_decay(weight_decay_) {
        for (const auto& [name, t] : params) {
            m.emplace_back(t.size(), 0.0);
            v.emplace_back(t.size(), 0.0);
        }
    }

    void step(std::vector<std::pair<std::string, Tensor>>& params,
              std::size_t step_num, double decay_factor) {
        const double lr_t = lr * decay_factor;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_num));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_num));
        for (std::size_t p = 0; p < params.size(); ++p) {
            auto& t = params[p].second;
            if (!t.has_grad()) continue;
            auto values = t.mutable_values();
            auto grads = t.grad();
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double g = grads[i];
                m[p][i] = beta1 * m[p][i] + (1.0 - beta1) * g;
                v[p][i] = beta2 * v[p][i] + (1.0 - beta2) * g * g;
                const double mhat = m[p][i] / bc1;
                const double vhat = v[p][i] / bc2;
                values[i] -= lr_t * (mhat / (std::sqrt(vhat) + eps) +
                                     weight_decay * values[i]);
            }
        }
    }
};

std::vector<std::vector<double>> snapshot(
    const std::vector<std::pair<std::string, Tensor>>& params) {
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : params) {
        out.emplace_back(t.values().begin(), t.values().end());
    }
    return out;
}

void restore(std::vector<std::pair<std::string, Tensor>>& params,
             const std::vector<std::vector<double>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto values = params[i].second.mutable_values();
        std::copy(snap[i].begin(), snap[i].end(), values.begin());
    }
}

double dev_macro_f1(const Model& model, const std::vector<Document>& dev,
                    const Vocabulary& vocab) {
    std::vector<int> preds, labels;
    for (const auto& doc : dev) {
        preds.push_back(
            model.predict(encode(doc.tokens, vocab, model.config().max_len)));
        labels.push_back(doc.label);
    }
    return f1_macro(preds, labels,
                    static_cast<int>(model.config().num_classes));
}

}  // namespace

FitResult fit(Model& model, const std::vector<Document>& train,
              const std::vector<Document>& dev, const Vocabulary& vocab,
              const TrainConfig& cfg, const SalienceTable* salience) {
    if (train.empty() || dev.empty()) {
        throw DataError("fit: empty train or dev split");
    }
    if (cfg.lambda > 0.0 && salience == nullptr) {
        throw DataError("fit: lambda > 0 requires salience maps");
    }
    const std::size_t max_len = model.config().max_len;

    // precompute encodings and normalized salience targets
    std::vector<std::vector<std::size_t>> encoded;
    std::vector<std::vector<double>> targets;
    std::vector<std::string> missing;
    for (const auto& doc : train) {
        encoded.push_back(encode(doc.tokens, vocab, max_len));
        if (cfg.lambda > 0.0) {
            if (!salience->count(doc.id)) {
                missing.push_back(doc.id);
                targets.emplace_back();
            } else {
                targets.push_back(salience_target(doc, *salience, max_len));
            }
        }
    }
    if (!missing.empty()) {
        std::string ids = missing.front();
        for (std::size_t i = 1; i < missing.size() && i < 10; ++i) {
            ids += ", " + missing[i];
        }
        throw DataError("fit: salience missing for doc ids: " + ids);
    }

    AdamW opt_encoder(model.encoder_parameters(), cfg.lr_model,
                      cfg.weight_decay);
    AdamW opt_head(model.head_parameters(), cfg.lr_head, cfg.weight_decay);

    std::mt19937_64 shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batches_per_epoch =
        (train.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = cfg.epochs * batches_per_epoch;

    FitResult result;
    result.best_dev_f1 = -1.0;
    std::vector<std::vector<double>> best_encoder, best_head;
    std::size_t step_num = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_lc = 0.0, epoch_lsal = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            const std::size_t end =
                std::min(order.size(), start + cfg.batch_size);
            Tensor batch_loss;
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t idx = order[b];
                auto fr = model.forward(encoded[idx]);
                AlphaVector alpha;
                std::vector<double> sigma;
                if (cfg.lambda > 0.0) {
                    alpha = extract_alpha(fr.profile);
                    sigma = targets[idx];
                }
                auto jl = joint_loss(fr.logits, train[idx].label, alpha, sigma,
                                     cfg.lambda);
                epoch_lc += jl.breakdown.l_c;
                epoch_lsal += jl.breakdown.l_sal;
                batch_loss =
                    b == start ? jl.total : add(batch_loss, jl.total);
            }
            batch_loss =
                scale(batch_loss, 1.0 / static_cast<double>(end - start));
            if (!std::isfinite(batch_loss.value())) {
                throw NumericError("fit: non-finite loss at epoch " +
                                   std::to_string(epoch) + " step " +
                                   std::to_string(step_num));
            }
            backward(batch_loss);
            ++step_num;
            const double decay =
                cfg.linear_decay
                    ? 1.0 - static_cast<double>(step_num - 1) /
                                static_cast<double>(total_steps)
                    : 1.0;
            opt_encoder.step(model.encoder_parameters(), step_num, decay);
            opt_head.step(model.head_parameters(), step_num, decay);
        }

        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.l_c = epoch_lc / static_cast<double>(train.size());
        metrics.l_sal = epoch_lsal / static_cast<double>(train.size());
        metrics.dev_f1 = dev_macro_f1(model, dev, vocab);
        result.metrics.push_back(metrics);
        // ties go to the later epoch so auxiliary objectives keep refining
        // the kept weights while accuracy is flat
        if (metrics.dev_f1 >= result.best_dev_f1) {
            result.best_dev_f1 = metrics.dev_f1;
            result.best_epoch = epoch;
            best_encoder = snapshot(model.encoder_parameters());
            best_head = snapshot(model.head_parameters());
        }
    }
    restore(model.encoder_parameters(), best_encoder);
    restore(model.head_parameters(), best_head);
    return result;
}

double select_lambda(const std::vector<double>& candidates,
                     const std::vector<Document>& train,
                     const std::vector<Document>& dev,
                     const Vocabulary& vocab, const ModelConfig& model_cfg,
                     const TrainConfig& base_cfg,
                     const SalienceTable& salience) {
    if (candidates.empty()) {
        throw UsageError("select_lambda: no candidates");
    }
    double best_lambda = candidates.front();
    double best_fraction = std::numeric_limits<double>::infinity();
    for (double lambda : candidates) {
        TrainConfig cfg = base_cfg;
        cfg.lambda = lambda;
        Model model(model_cfg, cfg.seed);
        fit(model, train, dev, vocab, cfg,
            lambda > 0.0 ? &salience : nullptr);
        auto predict = model_predictor(model, vocab);
        double total = 0.0;
        for (const auto& doc : dev) {
            auto scores = attr_alpha(model, doc, vocab);
            total +=
                decision_flip_fraction(predict, doc, scores).flip_fraction;
        }
        const double mean = total / static_cast<double>(dev.size());
        if (mean < best_fraction) {
            best_fraction = mean;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

}  // namespace saloss
