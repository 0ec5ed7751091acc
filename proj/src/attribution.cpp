#include "saloss/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace saloss {

using nlohmann::json;

namespace {

int argmax_class(const Tensor& logits) {
    auto vals = logits.values();
    return static_cast<int>(
        std::max_element(vals.begin(), vals.end()) - vals.begin());
}

void check_scores_finite(const AttributionScores& scores) {
    for (double s : scores.scores) {
        if (!std::isfinite(s)) {
            throw NumericError("attribution " + scores.method +
                               ": non-finite score for doc " + scores.doc_id);
        }
    }
}

}  // namespace

AttributionScores attr_alpha(const Model& model, const Document& doc,
                             const Vocabulary& vocab) {
    auto fr = model.forward(encode(doc.tokens, vocab, model.config().max_len));
    auto alpha = extract_alpha(fr.profile);
    AttributionScores scores;
    scores.doc_id = doc.id;
    scores.method = "alpha";
    scores.predicted_class = argmax_class(fr.logits);
    scores.scores.assign(alpha.weights.values().begin(),
                         alpha.weights.values().end());
    check_scores_finite(scores);
    return scores;
}

AttributionScores attr_alpha_grad(const Model& model, const Document& doc,
                                  const Vocabulary& vocab) {
    auto fr = model.forward(encode(doc.tokens, vocab, model.config().max_len));
    const int pred = argmax_class(fr.logits);
    Tensor y_hat = pick(fr.logits, static_cast<std::size_t>(pred));
    backward(y_hat);
    const auto& heads = fr.profile.attn.back();
    const auto& positions = fr.profile.content_positions;
    AttributionScores scores;
    scores.doc_id = doc.id;
    scores.method = "alpha_grad";
    scores.predicted_class = pred;
    scores.scores.assign(positions.size(), 0.0);
    const double inv_h = 1.0 / static_cast<double>(heads.size());
    for (const auto& attn : heads) {
        // CLS row entries live at flat indices [0, t)
        auto values = attn.values();
        auto grads = attn.grad();
        for (std::size_t i = 0; i < positions.size(); ++i) {
            const std::size_t p = positions[i];
            scores.scores[i] += inv_h * values[p] * grads[p];
        }
    }
    check_scores_finite(scores);
    return scores;
}

AttributionScores attr_input_x_grad(const Model& model, const Document& doc,
                                    const Vocabulary& vocab) {
    auto fr = model.forward(encode(doc.tokens, vocab, model.config().max_len));
    const int pred = argmax_class(fr.logits);
    backward(pick(fr.logits, static_cast<std::size_t>(pred)));
    const auto& positions = fr.profile.content_positions;
    const std::size_t d = fr.embedded.cols();
    auto x = fr.embedded.values();
    auto g = fr.embedded.grad();
    AttributionScores scores;
    scores.doc_id = doc.id;
    scores.method = "input_x_grad";
    scores.predicted_class = pred;
    for (std::size_t p : positions) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += x[p * d + j] * g[p * d + j];
        scores.scores.push_back(dot);
    }
    check_scores_finite(scores);
    return scores;
}

namespace {

struct IgResult {
    AttributionScores scores;
    double completeness_gap = 0.0;
};

IgResult integrated_gradients_impl(const Model& model, const Document& doc,
                                   const Vocabulary& vocab, int steps) {
    if (steps < 1) {
        throw UsageError("integrated_gradients: steps must be >= 1");
    }
    auto ids = encode(doc.tokens, vocab, model.config().max_len);
    auto fr = model.forward(ids);
    const int pred = argmax_class(fr.logits);
    const auto& positions = fr.profile.content_positions;
    const std::size_t t = fr.embedded.rows(), d = fr.embedded.cols();
    const std::vector<double> x(fr.embedded.values().begin(),
                                fr.embedded.values().end());

    std::vector<double> grad_sum(x.size(), 0.0);
    for (int k = 1; k <= steps; ++k) {
        const double a = static_cast<double>(k) / static_cast<double>(steps);
        std::vector<double> scaled(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = a * x[i];
        Tensor emb = Tensor::from({t, d}, std::move(scaled), true);
        auto step_fr = model.forward_embedded(emb);
        backward(pick(step_fr.logits, static_cast<std::size_t>(pred)));
        auto g = emb.grad();
        for (std::size_t i = 0; i < x.size(); ++i) grad_sum[i] += g[i];
    }

    IgResult result;
    result.scores.doc_id = doc.id;
    result.scores.method = "integrated_gradients";
    result.scores.predicted_class = pred;
    const double inv_steps = 1.0 / static_cast<double>(steps);
    double total = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dot += x[i * d + j] * grad_sum[i * d + j] * inv_steps;
        }
        total += dot;
        if (std::binary_search(positions.begin(), positions.end(), i)) {
            result.scores.scores.push_back(dot);
        }
    }
    check_scores_finite(result.scores);

    Tensor baseline = Tensor::zeros({t, d});
    const double y_base = model.forward_embedded(baseline)
                              .logits.at(static_cast<std::size_t>(pred));
    const double y_full = fr.logits.at(static_cast<std::size_t>(pred));
    result.completeness_gap = std::abs(total - (y_full - y_base));
    return result;
}

}  // namespace

AttributionScores attr_integrated_gradients(const Model& model,
                                            const Document& doc,
                                            const Vocabulary& vocab,
                                            int steps) {
    return integrated_gradients_impl(model, doc, vocab, steps).scores;
}

double ig_completeness_gap(const Model& model, const Document& doc,
                           const Vocabulary& vocab, int steps) {
    return integrated_gradients_impl(model, doc, vocab, steps)
        .completeness_gap;
}

std::vector<double> integrated_gradients_fn(
    const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
    int steps) {
    if (steps < 1) {
        throw UsageError("integrated_gradients: steps must be >= 1");
    }
    const std::vector<double> base(x.values().begin(), x.values().end());
    std::vector<double> grad_sum(base.size(), 0.0);
    for (int k = 1; k <= steps; ++k) {
        const double a = static_cast<double>(k) / static_cast<double>(steps);
        std::vector<double> scaled(base.size());
        for (std::size_t i = 0; i < base.size(); ++i) scaled[i] = a * base[i];
        Tensor point = Tensor::from(x.shape(), std::move(scaled), true);
        Tensor y = f(point);
        if (y.size() != 1) {
            throw ShapeError("integrated_gradients: f must be scalar-valued");
        }
        backward(y);
        auto g = point.grad();
        for (std::size_t i = 0; i < base.size(); ++i) grad_sum[i] += g[i];
    }
    const double inv_steps = 1.0 / static_cast<double>(steps);
    std::vector<double> out(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        out[i] = base[i] * grad_sum[i] * inv_steps;
    }
    return out;
}

double ig_completeness_gap_fn(const std::function<Tensor(const Tensor&)>& f,
                              const Tensor& x, int steps) {
    auto scores = integrated_gradients_fn(f, x, steps);
    double total = 0.0;
    for (double s : scores) total += s;
    const double y_full = f(x).value();
    const double y_base = f(Tensor::zeros(x.shape())).value();
    return std::abs(total - (y_full - y_base));
}

const std::vector<std::string>& attribution_methods() {
    static const std::vector<std::string> methods = {
        "alpha", "alpha_grad", "input_x_grad", "integrated_gradients"};
    return methods;
}

AttributionScores attribute(const Model& model, const Document& doc,
                            const Vocabulary& vocab, const std::string& method,
                            int ig_steps) {
    if (method == "alpha") return attr_alpha(model, doc, vocab);
    if (method == "alpha_grad") return attr_alpha_grad(model, doc, vocab);
    if (method == "input_x_grad") return attr_input_x_grad(model, doc, vocab);
    if (method == "integrated_gradients" || method == "ig") {
        return attr_integrated_gradients(model, doc, vocab, ig_steps);
    }
    throw UsageError("unknown attribution method \"" + method + "\"");
}

void save_attributions_jsonl(const std::vector<AttributionScores>& scores,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_attributions: cannot open " + path);
    for (const auto& s : scores) {
        json obj;
        obj["id"] = s.doc_id;
        obj["method"] = s.method;
        obj["predicted_class"] = s.predicted_class;
        obj["scores"] = s.scores;
        out << obj.dump() << "\n";
    }
}

std::vector<AttributionScores> load_attributions_jsonl(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_attributions: cannot open " + path);
    std::vector<AttributionScores> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("load_attributions: line " +
                            std::to_string(line_no) + ": " + e.what());
        }
        AttributionScores s;
        s.doc_id = obj.at("id").get<std::string>();
        s.method = obj.at("method").get<std::string>();
        s.predicted_class = obj.at("predicted_class").get<int>();
        s.scores = obj.at("scores").get<std::vector<double>>();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace saloss
