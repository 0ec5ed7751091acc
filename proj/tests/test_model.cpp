#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "saloss/model.hpp"

using namespace saloss;

namespace {

ModelConfig tiny_config(std::size_t vocab = 12) {
    ModelConfig cfg;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.vocab_size = vocab;
    cfg.max_len = 8;
    cfg.num_classes = 3;
    return cfg;
}

void randomize(Tensor& t, std::mt19937_64& rng, double sd = 0.1) {
    std::normal_distribution<double> dist(0.0, sd);
    for (auto& v : t.mutable_values()) v = dist(rng);
}

// CLS + content ids + SEP
std::vector<std::size_t> seq(std::vector<std::size_t> content) {
    std::vector<std::size_t> ids = {Vocabulary::kCls};
    for (auto id : content) ids.push_back(id);
    ids.push_back(Vocabulary::kSep);
    return ids;
}

AttentionProfile hand_profile(
    const std::vector<std::vector<double>>& cls_rows,
    std::vector<std::size_t> content_positions) {
    AttentionProfile profile;
    profile.seq_len = cls_rows.front().size();
    profile.pad_mask.assign(profile.seq_len, false);
    profile.content_positions = std::move(content_positions);
    std::vector<Tensor> heads;
    for (const auto& row : cls_rows) {
        std::vector<double> values(profile.seq_len * profile.seq_len, 0.0);
        for (std::size_t j = 0; j < row.size(); ++j) values[j] = row[j];
        heads.push_back(
            Tensor::from({profile.seq_len, profile.seq_len}, std::move(values)));
    }
    profile.attn.push_back(std::move(heads));
    return profile;
}

}  // namespace

TEST_CASE("zero-initialized head gives zero logits") {
    Model model(tiny_config(), 1);
    auto fr = model.forward(seq({4, 5, 6}));
    for (double v : fr.logits.values()) CHECK(v == 0.0);
}

TEST_CASE("attention rows are distributions") {
    Model model(tiny_config(), 2);
    auto fr = model.forward(seq({7}));
    REQUIRE(fr.profile.attn.size() == 2);
    for (const auto& layer : fr.profile.attn) {
        for (const auto& head : layer) {
            REQUIRE(head.rows() == 3);
            for (std::size_t r = 0; r < 3; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < 3; ++c) {
                    CHECK(head.at(r, c) >= 0.0);
                    s += head.at(r, c);
                }
                CHECK(std::abs(s - 1.0) < 1e-9);
            }
        }
    }
}

TEST_CASE("pad columns carry zero attention") {
    Model model(tiny_config(), 3);
    auto ids = seq({4, 5});
    ids.push_back(Vocabulary::kPad);
    std::vector<bool> pads = {false, false, false, false, true};
    auto fr = model.forward(ids, pads);
    for (const auto& layer : fr.profile.attn) {
        for (const auto& head : layer) {
            for (std::size_t r = 0; r < 5; ++r) CHECK(head.at(r, 4) == 0.0);
        }
    }
}

TEST_CASE("duplicate documents produce identical logits") {
    Model model(tiny_config(), 4);
    std::mt19937_64 rng(5);
    randomize(model.head_parameters()[0].second, rng);
    auto batch = model.logits_batch({seq({4, 5}), seq({4, 5})});
    CHECK(batch[0] == batch[1]);
}

TEST_CASE("batch is permutation-equivariant") {
    Model model(tiny_config(), 4);
    std::mt19937_64 rng(6);
    randomize(model.head_parameters()[0].second, rng);
    auto a = model.logits_batch({seq({4}), seq({5, 6})});
    auto b = model.logits_batch({seq({5, 6}), seq({4})});
    CHECK(a[0] == b[1]);
    CHECK(a[1] == b[0]);
}

TEST_CASE("input validation") {
    Model model(tiny_config(), 1);
    CHECK_THROWS_AS(model.forward(seq({99})), DataError);
    CHECK_THROWS_AS(model.forward({}), DataError);
    CHECK_THROWS_AS(model.logits_batch({}), DataError);
    CHECK_THROWS_AS(model.forward(std::vector<std::size_t>(9, 4)), DataError);
}

TEST_CASE("extract_alpha hand average of two heads") {
    auto profile = hand_profile({{0.0, 0.2, 0.8, 0.0}, {0.0, 0.6, 0.4, 0.0}},
                                {1, 2});
    auto alpha = extract_alpha(profile);
    REQUIRE(alpha.weights.size() == 2);
    CHECK(alpha.weights.at(0) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(alpha.weights.at(1) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("extract_alpha renormalizes uniform CLS attention") {
    const std::size_t k = 3;
    // CLS attends 1/(k+1) to itself and each of k content tokens
    std::vector<double> row = {0.25, 0.25, 0.25, 0.25, 0.0};
    auto profile = hand_profile({row}, {1, 2, 3});
    auto alpha = extract_alpha(profile);
    for (std::size_t i = 0; i < k; ++i) {
        CHECK(alpha.weights.at(i) == doctest::Approx(1.0 / k).epsilon(1e-12));
    }
}

TEST_CASE("extract_alpha single content token") {
    auto profile = hand_profile({{0.3, 0.5, 0.2}}, {1});
    auto alpha = extract_alpha(profile);
    REQUIRE(alpha.weights.size() == 1);
    CHECK(alpha.weights.at(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("extract_alpha with no content positions errors") {
    auto profile = hand_profile({{1.0, 0.0}}, {});
    CHECK_THROWS_AS(extract_alpha(profile), DataError);
}

TEST_CASE("alpha from a real forward pass is a content distribution") {
    Model model(tiny_config(), 7);
    auto fr = model.forward(seq({4, 5, 6, 7}));
    auto alpha = extract_alpha(fr.profile);
    REQUIRE(alpha.weights.size() == 4);
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(alpha.weights.at(i) >= 0.0);
        s += alpha.weights.at(i);
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
}

TEST_CASE("logit gradients pass gradient_check") {
    auto cfg = tiny_config();
    cfg.num_layers = 1;
    Model model(cfg, 8);
    // lift weights well above the training init so gradients dominate
    // finite-difference noise
    std::mt19937_64 rng(9);
    for (auto& [name, t] : model.encoder_parameters()) {
        if (name.find("ln") == std::string::npos) randomize(t, rng, 0.6);
    }
    randomize(model.head_parameters()[0].second, rng, 0.6);
    auto ids = seq({4, 5, 6});

    SUBCASE("w.r.t. input embeddings") {
        Tensor x = model.embed(ids, /*detach=*/true);
        auto f = [&](const Tensor& emb) {
            return pick(model.forward_embedded(emb).logits, 1);
        };
        CHECK(gradient_check(f, x, 1e-5) < 1e-4);
    }
    SUBCASE("w.r.t. attention projection weights") {
        auto& params = model.encoder_parameters();
        for (auto& [name, t] : params) {
            if (name != "l0.h0.wq" && name != "l0.h1.wv") continue;
            auto f = [&](const Tensor&) {
                return pick(model.forward(ids).logits, 1);
            };
            INFO("param " << name);
            CHECK(gradient_check(f, t, 1e-5) < 1e-4);
        }
    }
}

TEST_CASE("checkpoint round trip preserves behavior exactly") {
    Model model(tiny_config(), 10);
    std::mt19937_64 rng(11);
    randomize(model.head_parameters()[0].second, rng);
    const std::string path = "model_ckpt_test.json";
    model.save(path);
    Model loaded = Model::load(path);
    auto a = model.logits_batch({seq({4, 5, 6})});
    auto b = loaded.logits_batch({seq({4, 5, 6})});
    CHECK(a == b);
    std::remove(path.c_str());
}
