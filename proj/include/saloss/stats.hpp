#pragma once

#include <vector>

#include "saloss/errors.hpp"

namespace saloss {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sided rank-sum test. Exact enumeration over all assignments when
/// min(n_a, n_b) <= 10 and there are no ties; otherwise the normal
/// approximation with midranks, tie-corrected variance and continuity
/// correction. All values identical across both samples gives p = 1.
TestResult wilcoxon_rank_sum(const std::vector<double>& sample_a,
                             const std::vector<double>& sample_b);

/// The normal-approximation path regardless of sample size (used to validate
/// the approximation against exact enumeration).
TestResult wilcoxon_rank_sum_normal(const std::vector<double>& sample_a,
                                    const std::vector<double>& sample_b);

/// Welch's two-sided t-test. The t CDF is evaluated by adaptive quadrature
/// of the density (absolute tolerance 1e-10). Degenerate zero-variance
/// samples: p = 1 for equal means, p = 0 otherwise.
TestResult t_test_two_sample(const std::vector<double>& sample_a,
                             const std::vector<double>& sample_b);

/// CDF of Student's t with nu degrees of freedom via adaptive Simpson
/// quadrature at the given absolute tolerance.
double student_t_cdf(double x, double nu, double abs_tol = 1e-10);

}  // namespace saloss
