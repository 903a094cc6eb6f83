#include "mmra/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmra {

namespace {

double gamma_p_series(double a, double x) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int i = 0; i < 10000; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
    if (!(a > 0)) throw Error("regularized_gamma_q: a must be positive");
    if (x <= 0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_fraction(a, x);
}

double chi_square_sf(double x, double dof) { return regularized_gamma_q(0.5 * dof, 0.5 * x); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("wilcoxon: paired samples must have equal length");
    std::vector<double> diff, magnitude;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d == 0.0) continue;
        diff.push_back(d);
        magnitude.push_back(std::abs(d));
    }
    if (diff.empty()) throw DataError("wilcoxon: all differences are zero");

    WilcoxonResult r;
    r.n = static_cast<int>(diff.size());
    const auto ranks = midranks(magnitude);
    for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];

    const double n = r.n;
    const double mean = n * (n + 1) / 4.0;
    double tie_term = 0.0;
    {
        std::vector<double> sorted = ranks;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i);
            tie_term += t * t * t - t;
            i = j;
        }
    }
    const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
    r.z = var > 0 ? (r.w_plus - mean) / std::sqrt(var) : 0.0;
    r.r = std::abs(r.z) / std::sqrt(n);

    if (r.n <= kWilcoxonExactLimit) {
        // Null distribution of W+ over all 2^n sign assignments. Rank sums
        // are multiples of 0.5, so compare on the doubled integer scale.
        const auto obs = std::llround(2 * r.w_plus);
        long long le = 0, ge = 0;
        const std::uint64_t total = std::uint64_t{1} << r.n;
        std::vector<long long> twice(ranks.size());
        for (std::size_t i = 0; i < ranks.size(); ++i) twice[i] = std::llround(2 * ranks[i]);
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            long long w = 0;
            for (int i = 0; i < r.n; ++i)
                if (mask & (std::uint64_t{1} << i)) w += twice[static_cast<std::size_t>(i)];
            le += w <= obs;
            ge += w >= obs;
        }
        const double tail = static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
        r.p_two_sided = std::min(1.0, 2.0 * tail);
        r.exact = true;
    } else {
        r.p_two_sided = std::min(1.0, 2.0 * normal_sf(std::abs(r.z)));
    }
    return r;
}

FriedmanResult friedman_test(const Matrix& scores) {
    const Index n = scores.rows(), k = scores.cols();
    if (n < 2 || k < 2) throw DataError("friedman: need at least 2 blocks and 2 treatments");
    FriedmanResult r;
    r.dof = static_cast<int>(k - 1);
    r.rank_sums.assign(static_cast<std::size_t>(k), 0.0);
    for (Index i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<std::size_t>(k));
        for (Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = scores(i, j);
        const auto ranks = midranks(row);
        for (std::size_t j = 0; j < ranks.size(); ++j) r.rank_sums[j] += ranks[j];
    }
    double sum_sq = 0.0;
    for (double R : r.rank_sums) sum_sq += R * R;
    const double nd = static_cast<double>(n), kd = static_cast<double>(k);
    r.chi2 = 12.0 / (nd * kd * (kd + 1)) * sum_sq - 3.0 * nd * (kd + 1);
    if (std::abs(r.chi2) < 1e-9) r.chi2 = 0.0;
    r.p = chi_square_sf(r.chi2, r.dof);
    return r;
}

}  // namespace mmra
