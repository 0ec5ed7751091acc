#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "saloss/salience.hpp"
#include "saloss/training.hpp"

using namespace saloss;

namespace {

SalienceTable textrank_table(const std::vector<Document>& docs) {
    TextRankConfig cfg;
    std::vector<SalienceMap> maps;
    for (const auto& doc : docs) {
        maps.push_back(compute_salience(doc, "textrank", cfg, nullptr,
                                        nullptr));
    }
    return salience_table(maps);
}

std::vector<double> flat_params(Model& model) {
    std::vector<double> out;
    for (auto& [name, t] : model.encoder_parameters()) {
        out.insert(out.end(), t.values().begin(), t.values().end());
    }
    for (auto& [name, t] : model.head_parameters()) {
        out.insert(out.end(), t.values().begin(), t.values().end());
    }
    return out;
}

}  // namespace

TEST_CASE("kl loss worked value and identities") {
    Tensor alpha = Tensor::from({2}, {0.5, 0.5}, true);
    Tensor kl = kl_salience_loss(alpha, {0.25, 0.75});
    const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    CHECK(kl.value() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(kl.value() == doctest::Approx(0.143841).epsilon(1e-5));

    Tensor same = Tensor::from({3}, {0.2, 0.5, 0.3}, true);
    CHECK(kl_salience_loss(same, {0.2, 0.5, 0.3}).value() ==
          doctest::Approx(0.0));
}

TEST_CASE("kl loss nonnegative for random distribution pairs") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 8;
        std::vector<double> p(n), q(n);
        double sp = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = unif(rng);
            q[i] = unif(rng);
            sp += p[i];
            sq += q[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            p[i] /= sp;
            q[i] /= sq;
        }
        Tensor alpha = Tensor::from({n}, std::vector<double>(p));
        CHECK(kl_salience_loss(alpha, q).value() >= -1e-12);
    }
}

TEST_CASE("kl loss gradient check") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(0.2, 1.5);
    std::vector<double> sigma = {0.1, 0.3, 0.4, 0.2};
    auto f = [&](const Tensor& x) {
        return kl_salience_loss(renormalize(x), sigma);
    };
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> init(4);
        for (auto& v : init) v = unif(rng);
        Tensor x = Tensor::from({4}, std::move(init), true);
        CHECK(gradient_check(f, x, 1e-5) < 1e-4);
    }
}

TEST_CASE("kl loss input validation") {
    Tensor alpha = Tensor::from({2}, {0.5, 0.5});
    CHECK_THROWS_AS(kl_salience_loss(alpha, {0.2, 0.3, 0.5}), ShapeError);
    CHECK_THROWS_AS(kl_salience_loss(alpha, {1.0, 0.0}), NumericError);
}

TEST_CASE("joint loss arithmetic") {
    Tensor logits = Tensor::from({2}, {0.0, 0.0}, true);
    AlphaVector alpha;
    alpha.weights = Tensor::from({2}, {0.5, 0.5}, true);
    std::vector<double> sigma = {0.25, 0.75};

    auto plain = joint_loss(logits, 0, alpha, sigma, 0.0);
    CHECK(plain.breakdown.l_c == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(plain.breakdown.l_sal == 0.0);
    CHECK(plain.total.value() == doctest::Approx(0.6931472).epsilon(1e-6));

    auto joint = joint_loss(logits, 0, alpha, sigma, 1e-3);
    CHECK(joint.total.value() == doctest::Approx(0.693291).epsilon(1e-5));
    CHECK(joint.breakdown.l_total ==
          doctest::Approx(joint.breakdown.l_c +
                          1e-3 * joint.breakdown.l_sal).epsilon(1e-12));

    CHECK_THROWS_AS(joint_loss(logits, 5, alpha, sigma, 0.0), DataError);
}

TEST_CASE("lambda zero gradients equal cross entropy") {
    Tensor logits = Tensor::from({3}, {0.4, -1.2, 0.8}, true);
    AlphaVector alpha;  // deliberately empty: must not be touched
    auto jl = joint_loss(logits, 2, alpha, {}, 0.0);
    backward(jl.total);
    auto got = std::vector<double>(logits.grad().begin(), logits.grad().end());

    Tensor logits2 = Tensor::from({3}, {0.4, -1.2, 0.8}, true);
    backward(cross_entropy_logits(logits2, 2));
    auto expected =
        std::vector<double>(logits2.grad().begin(), logits2.grad().end());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-14));
    }
}

TEST_CASE("salience target truncates and normalizes") {
    Document doc;
    doc.id = "d1";
    doc.tokens = {"a", "b", "c", "d", "e", "f"};
    SalienceTable table;
    table["d1"] = {1.0, 2.0, 1.0, 4.0, 8.0, 16.0};
    // max_len 6 leaves room for CLS/SEP plus 4 content tokens
    auto target = salience_target(doc, table, 6);
    REQUIRE(target.size() == 4);
    double sum = 0.0;
    for (double v : target) {
        CHECK(v > 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(target[1] == doctest::Approx(0.25).epsilon(1e-9));

    SalienceTable short_table;
    short_table["d1"] = {1.0, 2.0};  // covers too few tokens
    CHECK_THROWS_AS(salience_target(doc, short_table, 100), DataError);
    Document other;
    other.id = "missing";
    other.tokens = {"x"};
    CHECK_THROWS_AS(salience_target(other, table, 6), DataError);
}

TEST_CASE("fit is deterministic and learns the synthetic task") {
    SyntheticSpec spec;
    spec.num_docs = 120;
    spec.vocab_size = 40;
    spec.seq_len = 10;
    spec.num_classes = 2;
    spec.keywords_per_class = {{"spark", "ember"}, {"tide", "brine"}};
    spec.seed = 11;
    auto splits = make_synthetic_corpus(spec);
    auto vocab = Vocabulary::build(splits.train);

    ModelConfig mc;
    mc.num_layers = 1;
    mc.num_heads = 2;
    mc.d_model = 32;
    mc.d_ff = 64;
    mc.vocab_size = vocab.size();
    mc.max_len = 16;

    TrainConfig tc;
    tc.epochs = 12;
    tc.batch_size = 8;
    tc.lr_model = 3e-3;
    tc.seed = 3;

    Model a(mc, tc.seed);
    auto result_a = fit(a, splits.train, splits.dev, vocab, tc);
    CHECK(result_a.best_dev_f1 >= 0.95);
    CHECK(result_a.metrics.size() == tc.epochs);
    // losses should drop substantially from the first epoch to the last
    CHECK(result_a.metrics.back().l_c < result_a.metrics.front().l_c);

    Model b(mc, tc.seed);
    auto result_b = fit(b, splits.train, splits.dev, vocab, tc);
    CHECK(result_a.best_dev_f1 == result_b.best_dev_f1);
    CHECK(flat_params(a) == flat_params(b));  // bit-identical
}

TEST_CASE("fit with salience regularizer trains and reports kl") {
    SyntheticSpec spec;
    spec.num_docs = 100;
    spec.vocab_size = 40;
    spec.seq_len = 10;
    spec.num_classes = 2;
    spec.keywords_per_class = {{"spark", "ember"}, {"tide", "brine"}};
    spec.seed = 21;
    auto splits = make_synthetic_corpus(spec);
    auto vocab = Vocabulary::build(splits.train);
    auto table = textrank_table(splits.train);

    ModelConfig mc;
    mc.num_layers = 1;
    mc.num_heads = 2;
    mc.d_model = 32;
    mc.d_ff = 64;
    mc.vocab_size = vocab.size();
    mc.max_len = 16;

    TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 8;
    tc.lr_model = 3e-3;
    tc.seed = 3;
    tc.lambda = 1e-3;

    Model model(mc, tc.seed);
    auto result = fit(model, splits.train, splits.dev, vocab, tc, &table);
    CHECK(result.best_dev_f1 >= 0.9);
    for (const auto& m : result.metrics) CHECK(m.l_sal >= 0.0);

    // lambda > 0 without salience must refuse
    Model bare(mc, tc.seed);
    CHECK_THROWS_AS(fit(bare, splits.train, splits.dev, vocab, tc), DataError);

    // a table missing a training document id must name it
    SalienceTable incomplete = table;
    incomplete.erase(splits.train.front().id);
    Model partial(mc, tc.seed);
    const std::string erased_id = splits.train.front().id;
    CHECK_THROWS_WITH_AS(
        fit(partial, splits.train, splits.dev, vocab, tc, &incomplete),
        doctest::Contains(erased_id.c_str()), DataError);
}

TEST_CASE("select_lambda returns a candidate") {
    SyntheticSpec spec;
    spec.num_docs = 60;
    spec.vocab_size = 30;
    spec.seq_len = 8;
    spec.num_classes = 2;
    spec.keywords_per_class = {{"spark"}, {"tide"}};
    spec.seed = 31;
    auto splits = make_synthetic_corpus(spec);
    auto vocab = Vocabulary::build(splits.train);
    auto table = textrank_table(splits.train);

    ModelConfig mc;
    mc.num_layers = 1;
    mc.num_heads = 2;
    mc.d_model = 16;
    mc.d_ff = 32;
    mc.vocab_size = vocab.size();
    mc.max_len = 12;

    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 1;

    CHECK(select_lambda({1e-3}, splits.train, splits.dev, vocab, mc, tc,
                        table) == 1e-3);
    const double chosen = select_lambda({0.0, 1e-3}, splits.train, splits.dev,
                                        vocab, mc, tc, table);
    CHECK((chosen == 0.0 || chosen == 1e-3));
    CHECK_THROWS_AS(select_lambda({}, splits.train, splits.dev, vocab, mc, tc,
                                  table),
                    UsageError);
}
