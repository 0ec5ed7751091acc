#include "saloss/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

namespace saloss {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

const Tensor& find_param(
    const std::vector<std::pair<std::string, Tensor>>& params,
    const std::string& name) {
    for (const auto& [n, t] : params) {
        if (n == name) return t;
    }
    throw NumericError("model: unknown parameter " + name);
}

}  // namespace

Tensor Model::param(const std::string& name, Shape shape, std::mt19937_64& rng,
                    bool head, bool zero) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> values(n, 0.0);
    if (!zero) {
        std::normal_distribution<double> dist(0.0, 0.02);
        for (auto& v : values) v = dist(rng);
    }
    Tensor t = Tensor::from(std::move(shape), std::move(values), true);
    (head ? head_params_ : encoder_params_).emplace_back(name, t);
    return t;
}

const Tensor& Model::p(const std::string& name) const {
    for (const auto& [n, t] : encoder_params_) {
        if (n == name) return t;
    }
    return find_param(head_params_, name);
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
    if (config_.d_model % config_.num_heads != 0) {
        throw UsageError("model: d_model must be divisible by num_heads");
    }
    if (config_.vocab_size == 0) {
        throw UsageError("model: vocab_size must be set");
    }
    std::mt19937_64 rng(seed);
    param("tok_emb", {config_.vocab_size, config_.d_model}, rng, false);
    param("pos_emb", {config_.max_len, config_.d_model}, rng, false);
    const std::size_t dh = config_.d_model / config_.num_heads;
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        const std::string pre = "l" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < config_.num_heads; ++h) {
            const std::string hp = pre + "h" + std::to_string(h) + ".";
            param(hp + "wq", {config_.d_model, dh}, rng, false);
            param(hp + "wk", {config_.d_model, dh}, rng, false);
            param(hp + "wv", {config_.d_model, dh}, rng, false);
            param(hp + "wo", {dh, config_.d_model}, rng, false);
        }
        param(pre + "ln1.g", {config_.d_model}, rng, false, true);
        param(pre + "ln1.b", {config_.d_model}, rng, false, true);
        param(pre + "ff.w1", {config_.d_model, config_.d_ff}, rng, false);
        param(pre + "ff.b1", {config_.d_ff}, rng, false, true);
        param(pre + "ff.w2", {config_.d_ff, config_.d_model}, rng, false);
        param(pre + "ff.b2", {config_.d_model}, rng, false, true);
        param(pre + "ln2.g", {config_.d_model}, rng, false, true);
        param(pre + "ln2.b", {config_.d_model}, rng, false, true);
        // layer-norm gains start at 1
        for (const char* g : {"ln1.g", "ln2.g"}) {
            auto vals = const_cast<Tensor&>(p(pre + g)).mutable_values();
            std::fill(vals.begin(), vals.end(), 1.0);
        }
    }
    // classifier head starts at zero: an untrained head emits zero logits
    param("head.w", {config_.d_model, config_.num_classes}, rng, true, true);
    param("head.b", {config_.num_classes}, rng, true, true);
}

Tensor Model::embed(const std::vector<std::size_t>& ids, bool detach) const {
    if (ids.empty()) throw DataError("model: empty input");
    if (ids.size() > config_.max_len) {
        throw DataError("model: sequence length " + std::to_string(ids.size()) +
                        " exceeds max_len " + std::to_string(config_.max_len));
    }
    for (auto id : ids) {
        if (id >= config_.vocab_size) {
            throw DataError("model: token id " + std::to_string(id) +
                            " >= vocab_size " +
                            std::to_string(config_.vocab_size));
        }
    }
    std::vector<std::size_t> positions(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = i;
    Tensor x = add(embedding_lookup(p("tok_emb"), ids),
                   embedding_lookup(p("pos_emb"), positions));
    if (!detach) return x;
    return Tensor::from(x.shape(), {x.values().begin(), x.values().end()},
                        true);
}

ForwardResult Model::forward_embedded(const Tensor& embedded,
                                      const std::vector<bool>& pad_mask,
                                      std::mt19937_64* dropout_rng) const {
    if (embedded.shape().size() != 2 || embedded.cols() != config_.d_model) {
        throw ShapeError("model: embedded input must be t x d_model");
    }
    const std::size_t t = embedded.rows();
    std::vector<bool> pads = pad_mask;
    if (pads.empty()) pads.assign(t, false);
    if (pads.size() != t) throw ShapeError("model: pad mask length mismatch");

    // key-side mask: every query row masks pad columns
    std::vector<double> attn_mask(t * t, 0.0);
    bool any_pad = false;
    for (std::size_t j = 0; j < t; ++j) {
        if (!pads[j]) continue;
        any_pad = true;
        for (std::size_t i = 0; i < t; ++i) attn_mask[i * t + j] = 1.0;
    }

    const std::size_t dh = config_.d_model / config_.num_heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    auto maybe_dropout = [&](Tensor x) {
        if (config_.dropout <= 0.0 || dropout_rng == nullptr) return x;
        std::bernoulli_distribution keep(1.0 - config_.dropout);
        std::vector<double> mask_vals(x.size());
        const double inv_keep = 1.0 / (1.0 - config_.dropout);
        for (auto& v : mask_vals) v = keep(*dropout_rng) ? inv_keep : 0.0;
        return mul(x, Tensor::from(x.shape(), std::move(mask_vals)));
    };

    ForwardResult result;
    result.profile.pad_mask = pads;
    result.profile.seq_len = t;
    result.embedded = embedded;

    Tensor x = embedded;
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        const std::string pre = "l" + std::to_string(l) + ".";
        std::vector<Tensor> head_attn;
        Tensor attn_out;
        for (std::size_t h = 0; h < config_.num_heads; ++h) {
            const std::string hp = pre + "h" + std::to_string(h) + ".";
            Tensor q = matmul(x, p(hp + "wq"));
            Tensor k = matmul(x, p(hp + "wk"));
            Tensor v = matmul(x, p(hp + "wv"));
            Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_dh);
            if (any_pad) scores = masked_fill(scores, attn_mask);
            Tensor attn = softmax_rows(scores);
            head_attn.push_back(attn);
            Tensor out = matmul(matmul(attn, v), p(hp + "wo"));
            attn_out = h == 0 ? out : add(attn_out, out);
        }
        result.profile.attn.push_back(std::move(head_attn));
        x = layer_norm(add(x, maybe_dropout(attn_out)), p(pre + "ln1.g"),
                       p(pre + "ln1.b"));
        Tensor ff = add(
            matmul(relu(add(matmul(x, p(pre + "ff.w1")), p(pre + "ff.b1"))),
                   p(pre + "ff.w2")),
            p(pre + "ff.b2"));
        x = layer_norm(add(x, maybe_dropout(ff)), p(pre + "ln2.g"),
                       p(pre + "ln2.b"));
    }
    result.logits = add(select_row(matmul(x, p("head.w")), 0), p("head.b"));

    // without token ids, content = interior non-pad positions
    for (std::size_t i = 1; i + 1 < t; ++i) {
        if (!pads[i]) result.profile.content_positions.push_back(i);
    }
    return result;
}

ForwardResult Model::forward(const std::vector<std::size_t>& ids,
                             const std::vector<bool>& pad_mask,
                             std::mt19937_64* dropout_rng) const {
    ForwardResult result =
        forward_embedded(embed(ids), pad_mask, dropout_rng);
    result.profile.content_positions.clear();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] != Vocabulary::kPad && ids[i] != Vocabulary::kCls &&
            ids[i] != Vocabulary::kSep) {
            result.profile.content_positions.push_back(i);
        }
    }
    return result;
}

std::vector<std::vector<double>> Model::logits_batch(
    const std::vector<std::vector<std::size_t>>& batch) const {
    if (batch.empty()) throw DataError("model: empty batch");
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto& ids : batch) {
        auto fr = forward(ids);
        out.emplace_back(fr.logits.values().begin(), fr.logits.values().end());
    }
    return out;
}

int Model::predict(const std::vector<std::size_t>& ids) const {
    auto fr = forward(ids);
    auto vals = fr.logits.values();
    return static_cast<int>(
        std::max_element(vals.begin(), vals.end()) - vals.begin());
}

void Model::save(const std::string& path) const {
    json obj;
    obj["version"] = kCheckpointVersion;
    obj["config"] = {{"num_layers", config_.num_layers},
                     {"num_heads", config_.num_heads},
                     {"d_model", config_.d_model},
                     {"d_ff", config_.d_ff},
                     {"vocab_size", config_.vocab_size},
                     {"max_len", config_.max_len},
                     {"num_classes", config_.num_classes},
                     {"dropout", config_.dropout}};
    json params = json::object();
    auto dump = [&](const std::vector<std::pair<std::string, Tensor>>& list) {
        for (const auto& [name, t] : list) {
            params[name] = {{"shape", t.shape()},
                            {"values", std::vector<double>(t.values().begin(),
                                                           t.values().end())}};
        }
    };
    dump(encoder_params_);
    dump(head_params_);
    obj["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw DataError("model: cannot open " + path + " for writing");
    out << obj.dump();
}

Model Model::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("model: cannot open checkpoint " + path);
    json obj;
    try {
        in >> obj;
    } catch (const json::parse_error& e) {
        throw DataError("model: malformed checkpoint " + path + ": " + e.what());
    }
    if (obj.at("version").get<int>() != kCheckpointVersion) {
        throw DataError("model: unsupported checkpoint version");
    }
    const auto& c = obj.at("config");
    ModelConfig config;
    config.num_layers = c.at("num_layers").get<std::size_t>();
    config.num_heads = c.at("num_heads").get<std::size_t>();
    config.d_model = c.at("d_model").get<std::size_t>();
    config.d_ff = c.at("d_ff").get<std::size_t>();
    config.vocab_size = c.at("vocab_size").get<std::size_t>();
    config.max_len = c.at("max_len").get<std::size_t>();
    config.num_classes = c.at("num_classes").get<std::size_t>();
    config.dropout = c.at("dropout").get<double>();
    Model model(config, 0);
    auto restore = [&](std::vector<std::pair<std::string, Tensor>>& list) {
        for (auto& [name, t] : list) {
            const auto& entry = obj.at("params").at(name);
            auto values = entry.at("values").get<std::vector<double>>();
            if (values.size() != t.size()) {
                throw DataError("model: checkpoint shape mismatch for " + name);
            }
            std::copy(values.begin(), values.end(),
                      t.mutable_values().begin());
        }
    };
    restore(model.encoder_params_);
    restore(model.head_params_);
    return model;
}

AlphaVector extract_alpha(const AttentionProfile& profile) {
    if (profile.attn.empty()) {
        throw NumericError("extract_alpha: profile has no layers");
    }
    if (profile.content_positions.empty()) {
        throw DataError("extract_alpha: all content positions masked");
    }
    const auto& last = profile.attn.back();
    Tensor avg;
    for (std::size_t h = 0; h < last.size(); ++h) {
        Tensor row = select_row(last[h], 0);
        avg = h == 0 ? row : add(avg, row);
    }
    avg = scale(avg, 1.0 / static_cast<double>(last.size()));
    AlphaVector alpha;
    alpha.content_positions = profile.content_positions;
    alpha.weights = renormalize(gather(avg, profile.content_positions));
    return alpha;
}

}  // namespace saloss
