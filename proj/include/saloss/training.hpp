#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "saloss/data.hpp"
#include "saloss/model.hpp"
#include "saloss/salience.hpp"
#include "saloss/tensor.hpp"

namespace saloss {

struct TrainConfig {
    double lambda = 0.0;
    double lr_model = 1e-3;
    double lr_head = 1e-2;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    std::string salience_method = "textrank";
    bool linear_decay = true;
    double weight_decay = 0.01;
};

struct LossBreakdown {
    double l_c = 0.0;
    double l_sal = 0.0;
    double l_total = 0.0;
};

/// Raw (unnormalized) per-token salience scores keyed by document id.
using SalienceTable = std::unordered_map<std::string, std::vector<double>>;

SalienceTable salience_table(const std::vector<SalienceMap>& maps);

/// KL(alpha || sigma) = sum_i alpha_i (log alpha_i - log sigma_i) as a graph
/// node, differentiable through alpha. sigma must be a strictly positive
/// distribution over the same content positions.
Tensor kl_salience_loss(const Tensor& alpha, const std::vector<double>& sigma);

struct JointLoss {
    Tensor total;  // scalar graph node
    LossBreakdown breakdown;
};

/// l_total = l_c + lambda * l_sal for one instance. lambda = 0 skips the
/// salience term entirely, so gradients equal pure cross-entropy.
JointLoss joint_loss(const Tensor& logits, int label, const AlphaVector& alpha,
                     const std::vector<double>& sigma, double lambda);

struct EpochMetrics {
    std::size_t epoch = 0;
    double l_c = 0.0;
    double l_sal = 0.0;
    double dev_f1 = 0.0;
};

struct FitResult {
    std::vector<EpochMetrics> metrics;
    std::size_t best_epoch = 0;
    double best_dev_f1 = 0.0;
};

/// AdamW with decoupled weight decay, linear learning-rate decay to zero,
/// separate rates for encoder and classifier head. The checkpoint kept is the
/// epoch with the best dev macro-F1. Deterministic for a fixed seed.
/// salience is required when cfg.lambda > 0 and must cover every training
/// document id (scores per content token, computed on the truncated tokens).
FitResult fit(Model& model, const std::vector<Document>& train,
              const std::vector<Document>& dev, const Vocabulary& vocab,
              const TrainConfig& cfg, const SalienceTable* salience = nullptr);

/// Normalized content-position salience target for one document, truncated to
/// the model's max_len contract.
std::vector<double> salience_target(const Document& doc,
                                    const SalienceTable& table,
                                    std::size_t max_len);

/// Trains one model per candidate and returns the lambda whose model needs
/// the lowest mean decision-flip fraction on the dev split (alpha scores).
double select_lambda(const std::vector<double>& candidates,
                     const std::vector<Document>& train,
                     const std::vector<Document>& dev,
                     const Vocabulary& vocab, const ModelConfig& model_cfg,
                     const TrainConfig& base_cfg,
                     const SalienceTable& salience);

}  // namespace saloss
