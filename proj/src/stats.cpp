#include "saloss/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace saloss {

namespace {

std::vector<double> midranks(const std::vector<double>& combined) {
    const std::size_t n = combined.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return combined[a] < combined[b];
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && combined[order[j + 1]] == combined[order[i]]) ++j;
        const double rank = (static_cast<double>(i + 1) +
                             static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

bool has_ties(const std::vector<double>& combined) {
    auto sorted = combined;
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

// Count subsets of {1..n} of size k with rank sum <= or >= thresholds via
// exhaustive recursion; n <= 20 keeps this immediate.
void count_extreme(std::size_t next, std::size_t remaining, double partial,
                   std::size_t n, double center, double observed_dev,
                   std::size_t& extreme, std::size_t& total) {
    if (remaining == 0) {
        ++total;
        if (std::abs(partial - center) >= observed_dev - 1e-12) ++extreme;
        return;
    }
    if (next > n || n - next + 1 < remaining) return;
    count_extreme(next + 1, remaining - 1,
                  partial + static_cast<double>(next), n, center,
                  observed_dev, extreme, total);
    count_extreme(next + 1, remaining, partial, n, center, observed_dev,
                  extreme, total);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

namespace {

TestResult wilcoxon_impl(const std::vector<double>& sample_a,
                         const std::vector<double>& sample_b,
                         bool allow_exact) {
    if (sample_a.empty() || sample_b.empty()) {
        throw DataError("wilcoxon_rank_sum: empty sample");
    }
    const std::size_t na = sample_a.size(), nb = sample_b.size();
    const std::size_t n = na + nb;
    std::vector<double> combined = sample_a;
    combined.insert(combined.end(), sample_b.begin(), sample_b.end());
    auto ranks = midranks(combined);
    double w = 0.0;
    for (std::size_t i = 0; i < na; ++i) w += ranks[i];
    const double mu = static_cast<double>(na) *
                      static_cast<double>(n + 1) / 2.0;

    TestResult result;
    result.statistic = w;

    const bool tie_free = !has_ties(combined);
    if (allow_exact && tie_free && std::min(na, nb) <= 10) {
        std::size_t extreme = 0, total = 0;
        count_extreme(1, na, 0.0, n, mu, std::abs(w - mu), extreme, total);
        result.p_value =
            static_cast<double>(extreme) / static_cast<double>(total);
        return result;
    }

    // tie-corrected variance
    double tie_term = 0.0;
    {
        auto sorted = combined;
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double nn = static_cast<double>(n);
    const double var = static_cast<double>(na) * static_cast<double>(nb) /
                       12.0 *
                       ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) {
        result.p_value = 1.0;  // all values identical
        return result;
    }
    const double dev = std::max(0.0, std::abs(w - mu) - 0.5);  // continuity
    const double z = dev / std::sqrt(var);
    result.p_value = std::min(1.0, 2.0 * normal_sf(z));
    return result;
}

}  // namespace

TestResult wilcoxon_rank_sum(const std::vector<double>& sample_a,
                             const std::vector<double>& sample_b) {
    return wilcoxon_impl(sample_a, sample_b, /*allow_exact=*/true);
}

TestResult wilcoxon_rank_sum_normal(const std::vector<double>& sample_a,
                                    const std::vector<double>& sample_b) {
    return wilcoxon_impl(sample_a, sample_b, /*allow_exact=*/false);
}

double student_t_cdf(double x, double nu, double abs_tol) {
    if (nu <= 0.0) throw NumericError("student_t_cdf: dof must be positive");
    const double log_coef = std::lgamma((nu + 1.0) / 2.0) -
                            std::lgamma(nu / 2.0) -
                            0.5 * std::log(nu * M_PI);
    auto density = [&](double t) {
        return std::exp(log_coef -
                        (nu + 1.0) / 2.0 * std::log1p(t * t / nu));
    };
    // adaptive Simpson on [0, |x|]
    std::function<double(double, double, double, double, double, double)>
        simpson = [&](double a, double b, double fa, double fm, double fb,
                      double tol) -> double {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        const double flm = density(lm), frm = density(rm);
        const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if (std::abs(left + right - whole) <= 15.0 * tol) {
            return left + right + (left + right - whole) / 15.0;
        }
        return simpson(a, m, fa, flm, fm, tol / 2.0) +
               simpson(m, b, fm, frm, fb, tol / 2.0);
    };
    const double upper = std::abs(x);
    double integral = 0.0;
    if (upper > 0.0) {
        const double m = 0.5 * upper;
        integral = simpson(0.0, upper, density(0.0), density(m),
                           density(upper), abs_tol);
    }
    return x >= 0.0 ? 0.5 + integral : 0.5 - integral;
}

TestResult t_test_two_sample(const std::vector<double>& sample_a,
                             const std::vector<double>& sample_b) {
    if (sample_a.size() < 2 || sample_b.size() < 2) {
        throw DataError("t_test: each sample needs size >= 2");
    }
    const double na = static_cast<double>(sample_a.size());
    const double nb = static_cast<double>(sample_b.size());
    const double ma =
        std::accumulate(sample_a.begin(), sample_a.end(), 0.0) / na;
    const double mb =
        std::accumulate(sample_b.begin(), sample_b.end(), 0.0) / nb;
    double va = 0.0, vb = 0.0;
    for (double v : sample_a) va += (v - ma) * (v - ma);
    for (double v : sample_b) vb += (v - mb) * (v - mb);
    va /= na - 1.0;
    vb /= nb - 1.0;

    TestResult result;
    if (va == 0.0 && vb == 0.0) {
        if (ma == mb) {
            result.statistic = 0.0;
            result.p_value = 1.0;
        } else {
            result.statistic = ma > mb
                                   ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
            result.p_value = 0.0;
        }
        return result;
    }
    const double se2 = va / na + vb / nb;
    result.statistic = (ma - mb) / std::sqrt(se2);
    const double nu = se2 * se2 /
                      (va * va / (na * na * (na - 1.0)) +
                       vb * vb / (nb * nb * (nb - 1.0)));
    result.p_value = std::min(
        1.0, 2.0 * (1.0 - student_t_cdf(std::abs(result.statistic), nu, 1e-12)));
    return result;
}

}  // namespace saloss
