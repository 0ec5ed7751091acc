#pragma once

#include <functional>
#include <string>
#include <vector>

#include "saloss/data.hpp"
#include "saloss/model.hpp"

namespace saloss {

/// Per-content-token importance scores from one attribution method for the
/// predicted (argmax) class. y_hat is the predicted-class logit.
struct AttributionScores {
    std::string doc_id;
    std::string method;  // alpha | alpha_grad | input_x_grad | integrated_gradients
    std::vector<double> scores;
    int predicted_class = 0;
};

/// Normalized attention scores (the alpha vector itself).
AttributionScores attr_alpha(const Model& model, const Document& doc,
                             const Vocabulary& vocab);

/// alpha_i * d y_hat / d alpha_i, gradients taken at the per-head last-layer
/// CLS attention entries, then head-averaged like alpha.
AttributionScores attr_alpha_grad(const Model& model, const Document& doc,
                                  const Vocabulary& vocab);

/// Per token, the dot product of the combined input embedding with the
/// gradient of y_hat w.r.t. that embedding.
AttributionScores attr_input_x_grad(const Model& model, const Document& doc,
                                    const Vocabulary& vocab);

/// Right-endpoint Riemann approximation of the path integral of gradients
/// from the all-zero embedding baseline to the input.
AttributionScores attr_integrated_gradients(const Model& model,
                                            const Document& doc,
                                            const Vocabulary& vocab,
                                            int steps = 50);

/// |sum_i score_i - (y_hat(x) - y_hat(baseline))| for integrated gradients.
double ig_completeness_gap(const Model& model, const Document& doc,
                           const Vocabulary& vocab, int steps);

/// Integrated gradients of an arbitrary scalar-valued function along the
/// straight path from the all-zero baseline: per-coordinate attribution
/// x_i * (1/steps) * sum_k df/dx_i at (k/steps)*x (right-endpoint sum).
std::vector<double> integrated_gradients_fn(
    const std::function<Tensor(const Tensor&)>& f, const Tensor& x, int steps);

/// |sum_i attribution_i - (f(x) - f(0))| for the function-level path integral.
double ig_completeness_gap_fn(const std::function<Tensor(const Tensor&)>& f,
                              const Tensor& x, int steps);

AttributionScores attribute(const Model& model, const Document& doc,
                            const Vocabulary& vocab, const std::string& method,
                            int ig_steps = 50);

const std::vector<std::string>& attribution_methods();

/// JSONL: {"id", "method", "predicted_class", "scores": [float]}.
void save_attributions_jsonl(const std::vector<AttributionScores>& scores,
                             const std::string& path);
std::vector<AttributionScores> load_attributions_jsonl(const std::string& path);

}  // namespace saloss
