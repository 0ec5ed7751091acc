#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "saloss/data.hpp"
#include "saloss/tensor.hpp"

namespace saloss {

struct ModelConfig {
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t d_model = 64;
    std::size_t d_ff = 128;
    std::size_t vocab_size = 0;
    std::size_t max_len = 64;
    std::size_t num_classes = 2;
    double dropout = 0.0;
};

/// Attention maps of one forward pass: attn[layer][head] is a t x t tensor
/// whose unmasked rows are distributions. Pad key columns carry zero weight.
struct AttentionProfile {
    std::vector<std::vector<Tensor>> attn;
    std::vector<bool> pad_mask;                   // true = padding position
    std::vector<std::size_t> content_positions;   // excludes CLS/SEP/pad
    std::size_t seq_len = 0;
};

/// Mean last-layer CLS attention restricted to content positions and
/// renormalized to sum 1. weights stays connected to the graph.
struct AlphaVector {
    Tensor weights;  // 1-D, length = content_positions.size()
    std::vector<std::size_t> content_positions;
};

struct ForwardResult {
    Tensor logits;    // 1-D, num_classes
    AttentionProfile profile;
    Tensor embedded;  // t x d_model combined token+position embeddings
};

/// Small multi-head transformer encoder classifier over token ids.
/// Position 0 is CLS; the last content position is SEP.
class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }

    /// ids must include CLS/SEP; pad_mask empty means no padding.
    ForwardResult forward(const std::vector<std::size_t>& ids,
                          const std::vector<bool>& pad_mask = {},
                          std::mt19937_64* dropout_rng = nullptr) const;

    /// Runs the encoder stack on externally supplied embeddings (the
    /// integrated-gradients path interpolates these toward zero).
    ForwardResult forward_embedded(const Tensor& embedded,
                                   const std::vector<bool>& pad_mask = {},
                                   std::mt19937_64* dropout_rng = nullptr) const;

    /// Combined token + position embedding for ids (the x of input-gradient
    /// attributions), detached into a fresh leaf when detach is true.
    Tensor embed(const std::vector<std::size_t>& ids, bool detach = false) const;

    /// Batched logits as plain values, one row per document.
    std::vector<std::vector<double>> logits_batch(
        const std::vector<std::vector<std::size_t>>& batch) const;

    int predict(const std::vector<std::size_t>& ids) const;

    std::vector<std::pair<std::string, Tensor>>& encoder_parameters() {
        return encoder_params_;
    }
    std::vector<std::pair<std::string, Tensor>>& head_parameters() {
        return head_params_;
    }

    void save(const std::string& path) const;
    static Model load(const std::string& path);

private:
    Model() = default;
    Tensor param(const std::string& name, Shape shape, std::mt19937_64& rng,
                 bool head, bool zero = false);
    const Tensor& p(const std::string& name) const;

    ModelConfig config_;
    std::vector<std::pair<std::string, Tensor>> encoder_params_;
    std::vector<std::pair<std::string, Tensor>> head_params_;
};

/// Last layer, CLS query row per head, averaged over heads, restricted to
/// content positions, renormalized. Differentiable through the stored
/// attention tensors.
AlphaVector extract_alpha(const AttentionProfile& profile);

}  // namespace saloss
