#ifndef MMRA_STATS_HPP
#define MMRA_STATS_HPP

// Nonparametric tests for comparing strategies over repeated runs.

#include "mmra/common.hpp"

#include <span>
#include <vector>

namespace mmra {

/// Regularised upper incomplete gamma Q(a, x), series / continued fraction
/// to 1e-10 relative accuracy.
double regularized_gamma_q(double a, double x);

/// P(X > x) for a chi-square variable with `dof` degrees of freedom.
double chi_square_sf(double x, double dof);

/// Standard normal upper-tail probability.
double normal_sf(double z);

/// Average ranks (1-based) with mid-ranks for ties.
std::vector<double> midranks(std::span<const double> values);

inline constexpr int kWilcoxonExactLimit = 12;

struct WilcoxonResult {
    int n = 0;          // pairs left after dropping zero differences
    double w_plus = 0;  // rank sum of positive differences
    double w_minus = 0;
    double z = 0;       // normal-approximation statistic (tie-corrected)
    double p_two_sided = 1;
    double r = 0;       // |z| / sqrt(n)
    bool exact = false;
};

/// Wilcoxon signed-rank test on x - y. The p-value is exact (full sign
/// enumeration) for n <= 12 and normal-approximate above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

struct FriedmanResult {
    double chi2 = 0;
    double p = 1;
    int dof = 0;
    std::vector<double> rank_sums;
};

/// Friedman test over an n-blocks x k-treatments score matrix.
FriedmanResult friedman_test(const Matrix& scores);

}  // namespace mmra

#endif
