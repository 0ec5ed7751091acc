#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "saloss/tensor.hpp"

using namespace saloss;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

TEST_CASE("softmax_rows uniform logits") {
    auto x = Tensor::from({1, 3}, {0, 0, 0});
    auto y = softmax_rows(x);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(y.at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax_rows output rows are distributions") {
    std::mt19937_64 rng(7);
    auto x = random_tensor({5, 9}, rng, false);
    auto y = softmax_rows(x);
    for (std::size_t r = 0; r < 5; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < 9; ++j) {
            CHECK(y.at(r, j) >= 0.0);
            s += y.at(r, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("matmul with ones column gives row sums") {
    auto a = Tensor::from({2, 3}, {1, 0, 2, 0, 1, 3});
    auto ones = Tensor::from({3, 1}, {1, 1, 1});
    auto y = matmul(a, ones);
    CHECK(y.at(0, 0) == doctest::Approx(3.0));
    CHECK(y.at(1, 0) == doctest::Approx(4.0));
}

TEST_CASE("layer_norm with unit gain zero bias") {
    // mean 2, population variance 2/3
    auto x = Tensor::from({1, 3}, {1, 2, 3});
    auto g = Tensor::from({3}, {1, 1, 1});
    auto b = Tensor::from({3}, {0, 0, 0});
    auto y = layer_norm(x, g, b);
    const double s = std::sqrt(2.0 / 3.0);
    CHECK(y.at(0, 0) == doctest::Approx((1.0 - 2.0) / s).epsilon(1e-9));
    CHECK(y.at(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(y.at(0, 2) == doctest::Approx((3.0 - 2.0) / s).epsilon(1e-9));
}

TEST_CASE("shape mismatch raises structured error") {
    auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    CHECK_THROWS_AS(mul(a, b), ShapeError);
}

TEST_CASE("non-finite input raises") {
    auto a = Tensor::from({2}, {1.0, std::numeric_limits<double>::infinity()});
    auto b = Tensor::from({2}, {1.0, 2.0});
    CHECK_THROWS_AS(add(a, b), NumericError);
}

TEST_CASE("backward of x*x at 3") {
    auto x = Tensor::scalar(3.0, true);
    auto y = mul(x, x);
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward of softmax component at (0,0)") {
    auto x = Tensor::from({1, 2}, {0, 0}, true);
    auto y = pick(softmax_rows(x), 0);
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(x.grad()[1] == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar loss") {
    auto x = Tensor::from({2}, {1, 2}, true);
    auto y = add(x, x);
    CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("layer_norm composed with matmul matches finite differences") {
    std::mt19937_64 rng(11);
    auto w = random_tensor({4, 4}, rng, false);
    auto g = random_tensor({4}, rng, false);
    auto b = random_tensor({4}, rng, false);
    auto c = random_tensor({4, 2}, rng, false);
    auto f = [&](const Tensor& x) {
        return mean(matmul(layer_norm(matmul(x, w), g, b), c));
    };
    auto x = random_tensor({3, 4}, rng);
    CHECK(gradient_check(f, x, 1e-5) < 1e-4);
}

TEST_CASE("gradient_check exact for linear function") {
    std::mt19937_64 rng(3);
    auto w = random_tensor({5}, rng, false);
    auto f = [&](const Tensor& x) { return sum(mul(x, w)); };
    auto x = random_tensor({5}, rng);
    CHECK(gradient_check(f, x, 1e-5) < 1e-10);
}

TEST_CASE("gradient_check on 3-class cross-entropy") {
    std::mt19937_64 rng(5);
    auto f = [](const Tensor& logits) { return cross_entropy_logits(logits, 1); };
    auto x = random_tensor({3}, rng);
    CHECK(gradient_check(f, x, 1e-5) < 1e-4);
}

TEST_CASE("masked_fill blocks gradient at masked coordinate") {
    auto x = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
    std::vector<double> mask = {0.0, 1.0, 0.0};
    auto y = sum(softmax_rows(masked_fill(x, mask)));
    backward(y);
    CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("shared subexpression accumulates gradients additively") {
    auto x = Tensor::scalar(2.0, true);
    auto shared = mul(x, x);             // x^2
    auto y = add(shared, shared);        // 2 x^2 -> dy/dx = 4x = 8
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("cross_entropy label out of range") {
    auto logits = Tensor::from({3}, {0, 0, 0});
    CHECK_THROWS_AS(cross_entropy_logits(logits, 5), DataError);
}

TEST_CASE("gradient_check over every op kind, 20 seeds") {
    for (unsigned seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        auto g = random_tensor({4}, rng, false);
        auto bias = random_tensor({4}, rng, false);
        auto w = random_tensor({4, 4}, rng, false);
        std::vector<double> mask = {0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0};
        std::vector<std::size_t> ids = {2, 0, 1};
        std::vector<std::size_t> idx = {5, 1, 7};
        struct Case {
            const char* name;
            Shape shape;
            std::function<Tensor(const Tensor&)> f;
        };
        const std::vector<Case> cases = {
            {"matmul", {3, 4}, [&](const Tensor& x) { return mean(matmul(x, w)); }},
            {"add", {4, 4}, [&](const Tensor& x) { return mean(add(x, w)); }},
            {"add_bias", {3, 4}, [&](const Tensor& x) { return mean(add(x, bias)); }},
            {"sub", {4, 4}, [&](const Tensor& x) { return mean(sub(x, w)); }},
            {"mul", {4, 4}, [&](const Tensor& x) { return mean(mul(x, w)); }},
            {"scale", {6}, [&](const Tensor& x) { return sum(scale(x, -2.5)); }},
            {"softmax_rows", {3, 4},
             [&](const Tensor& x) { return mean(matmul(softmax_rows(x), w)); }},
            {"layer_norm", {3, 4},
             [&](const Tensor& x) { return mean(layer_norm(x, g, bias)); }},
            {"embedding_lookup", {4, 4},
             [&](const Tensor& x) { return mean(embedding_lookup(x, ids)); }},
            {"concat", {4},
             [&](const Tensor& x) { return sum(mul(concat({x, x}), concat({x, x}))); }},
            {"mean", {3, 4}, [&](const Tensor& x) { return mean(mul(x, x)); }},
            {"transpose", {3, 4},
             [&](const Tensor& x) { return mean(matmul(transpose(x), x)); }},
            {"masked_fill", {3, 4},
             [&](const Tensor& x) {
                 return mean(matmul(softmax_rows(masked_fill(x, mask)), w));
             }},
            {"relu", {6}, [&](const Tensor& x) { return sum(relu(x)); }},
            {"select_row", {3, 4},
             [&](const Tensor& x) { return sum(select_row(x, 1)); }},
            {"gather", {8}, [&](const Tensor& x) { return sum(gather(x, idx)); }},
            {"renormalize", {4},
             [&](const Tensor& x) { return pick(renormalize(softmax_rows(x)), 0); }},
            {"cross_entropy", {4},
             [&](const Tensor& x) { return cross_entropy_logits(x, 2); }},
            {"log", {4},
             [&](const Tensor& x) { return sum(log_elem(softmax_rows(x))); }},
        };
        for (const auto& c : cases) {
            auto x = random_tensor(c.shape, rng);
            const double err = gradient_check(c.f, x, 1e-5);
            INFO("op=" << std::string(c.name) << " seed=" << seed);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("tape order is topological") {
    auto x = Tensor::scalar(1.5, true);
    auto y = mul(add(x, x), x);
    Tape tape(y);
    const auto& order = tape.order();
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (const auto& parent : order[i]->parents) {
            bool found_before = false;
            for (std::size_t j = 0; j < i; ++j) {
                if (order[j] == parent) found_before = true;
            }
            CHECK(found_before);
        }
    }
}
