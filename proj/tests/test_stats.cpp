#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "saloss/stats.hpp"

using namespace saloss;

namespace {

// Independent exact two-sided p for the rank-sum statistic: enumerate every
// size-na subset of ranks {1..n} directly with next_permutation over a
// selection mask.
double exact_ranksum_p(const std::vector<double>& a,
                       const std::vector<double>& b) {
    const std::size_t na = a.size(), n = a.size() + b.size();
    std::vector<double> combined = a;
    combined.insert(combined.end(), b.begin(), b.end());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) {
                  return combined[x] < combined[y];
              });
    std::vector<double> rank_of(n);
    for (std::size_t r = 0; r < n; ++r) {
        rank_of[order[r]] = static_cast<double>(r + 1);
    }
    double w = 0.0;
    for (std::size_t i = 0; i < na; ++i) w += rank_of[i];
    const double mu = static_cast<double>(na) * static_cast<double>(n + 1) / 2.0;
    const double dev = std::abs(w - mu);

    std::vector<bool> mask(n, false);
    std::fill(mask.begin(), mask.begin() + static_cast<long>(na), true);
    std::sort(mask.begin(), mask.end());
    std::size_t extreme = 0, total = 0;
    do {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (mask[r]) sum += static_cast<double>(r + 1);
        }
        ++total;
        if (std::abs(sum - mu) >= dev - 1e-12) ++extreme;
    } while (std::next_permutation(mask.begin(), mask.end()));
    return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("wilcoxon small separated samples") {
    auto r = wilcoxon_rank_sum({1.0, 2.0, 3.0}, {10.0, 11.0, 12.0});
    CHECK(r.statistic == doctest::Approx(6.0));
    CHECK(r.p_value == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("wilcoxon exact worked examples") {
    auto r1 = wilcoxon_rank_sum({1.5, 2.5, 9.0, 4.0}, {3.0, 5.5, 7.25});
    CHECK(r1.p_value == doctest::Approx(0.6285714285714286).epsilon(1e-12));
    auto r2 = wilcoxon_rank_sum(
        {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8},
        {0.15, 0.25, 0.9, 1.1, 1.3, 0.05});
    CHECK(r2.p_value == doctest::Approx(0.7545787545787546).epsilon(1e-12));
}

TEST_CASE("wilcoxon exact matches independent enumeration") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(-5.0, 5.0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t na = 2 + rng() % 7, nb = 2 + rng() % 7;
        std::vector<double> a(na), b(nb);
        for (auto& v : a) v = unif(rng);
        for (auto& v : b) v = unif(rng);
        const double expected = exact_ranksum_p(a, b);
        const auto got = wilcoxon_rank_sum(a, b);
        CHECK(got.p_value == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("wilcoxon symmetry and identical-sample degenerate") {
    std::vector<double> a = {0.3, 1.2, 4.5, 2.2};
    std::vector<double> b = {0.9, 3.3, 5.1};
    CHECK(wilcoxon_rank_sum(a, b).p_value ==
          doctest::Approx(wilcoxon_rank_sum(b, a).p_value).epsilon(1e-12));
    std::vector<double> same = {2.0, 2.0, 2.0};
    CHECK(wilcoxon_rank_sum(same, same).p_value == doctest::Approx(1.0));
}

TEST_CASE("wilcoxon normal approximation tracks exact p") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t na = 8 + rng() % 3, nb = 8 + rng() % 3;
        std::vector<double> a(na), b(nb);
        for (auto& v : a) v = unif(rng);
        for (auto& v : b) v = unif(rng) + 0.2;
        const auto exact = wilcoxon_rank_sum(a, b);
        const auto approx = wilcoxon_rank_sum_normal(a, b);
        CHECK(approx.statistic == doctest::Approx(exact.statistic));
        CHECK(std::abs(approx.p_value - exact.p_value) < 0.02);
    }
}

TEST_CASE("wilcoxon tied samples use midranks") {
    auto r = wilcoxon_rank_sum_normal({1.0, 2.0, 2.0, 5.0},
                                      {2.0, 3.0, 4.0, 6.0, 7.0});
    // three-way tie at 2 takes midrank (2+3+4)/3 = 3
    CHECK(r.statistic == doctest::Approx(1.0 + 3.0 + 3.0 + 7.0));
    CHECK(r.p_value == doctest::Approx(0.17060874485083155).epsilon(1e-9));
}

TEST_CASE("wilcoxon rejects empty samples") {
    CHECK_THROWS_AS(wilcoxon_rank_sum({}, {1.0}), DataError);
    CHECK_THROWS_AS(wilcoxon_rank_sum({1.0}, {}), DataError);
}

TEST_CASE("student t cdf against closed forms") {
    // nu = 1 is Cauchy, nu = 2 has an elementary closed form
    for (double x : {-3.0, -1.2, -0.4, 0.0, 0.7, 1.9, 4.2}) {
        const double cauchy = 0.5 + std::atan(x) / M_PI;
        CHECK(student_t_cdf(x, 1.0, 1e-12) ==
              doctest::Approx(cauchy).epsilon(1e-10));
        const double t2 = 0.5 + x / (2.0 * std::sqrt(2.0 + x * x));
        CHECK(student_t_cdf(x, 2.0, 1e-12) ==
              doctest::Approx(t2).epsilon(1e-10));
    }
    CHECK(student_t_cdf(0.0, 7.3) == doctest::Approx(0.5));
    CHECK_THROWS_AS(student_t_cdf(1.0, 0.0), NumericError);
}

TEST_CASE("welch t-test worked examples") {
    auto r1 = t_test_two_sample({1.0, 2.0, 3.0, 4.0, 5.0},
                                {2.0, 4.0, 6.0, 8.0, 10.0});
    CHECK(r1.statistic == doctest::Approx(-1.8973665961010275).epsilon(1e-10));
    CHECK(r1.p_value == doctest::Approx(0.10753119493062718).epsilon(1e-6));

    auto r2 = t_test_two_sample({0.12, 0.5, -0.3, 0.9, 1.4, 0.02},
                                {0.7, 0.77, 0.81, 0.94});
    CHECK(r2.statistic == doctest::Approx(-1.3998998293545244).epsilon(1e-10));
    CHECK(r2.p_value == doctest::Approx(0.2164637303612595).epsilon(1e-6));

    auto r3 = t_test_two_sample({10.0, 10.1, 9.9, 10.05},
                                {10.2, 10.3, 10.25, 10.4, 10.15});
    CHECK(r3.statistic == doctest::Approx(-4.083848906913437).epsilon(1e-10));
    CHECK(r3.p_value == doctest::Approx(0.004854787585470382).epsilon(1e-6));
}

TEST_CASE("welch degenerate and invalid inputs") {
    auto equal = t_test_two_sample({3.0, 3.0}, {3.0, 3.0, 3.0});
    CHECK(equal.statistic == doctest::Approx(0.0));
    CHECK(equal.p_value == doctest::Approx(1.0));
    auto apart = t_test_two_sample({1.0, 1.0}, {2.0, 2.0});
    CHECK(std::isinf(apart.statistic));
    CHECK(apart.p_value == doctest::Approx(0.0));
    CHECK_THROWS_AS(t_test_two_sample({1.0}, {2.0, 3.0}), DataError);
}
