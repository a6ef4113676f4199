#pragma once

#include <optional>
#include <span>
#include <vector>

namespace sleepassoc {

// ---------------------------------------------------------------------------
// Spearman correlation
// ---------------------------------------------------------------------------

struct CorrResult {
    double r = 0.0;
    int n = 0;
    double ci_lo = 0.0;  // Fisher-z interval, tanh back-transformed
    double ci_hi = 0.0;
    double stat_fisher_z = 0.0;  // atanh(r) * sqrt(n-3)
    double stat_t = 0.0;         // r * sqrt((n-2) / (1-r^2))
    double p = 0.0;              // two-sided, from stat_t with n-2 df
};

// Average-rank tie handling; r is the Pearson correlation of the ranks.
// Throws StatError for n < 4 or zero rank variance.
CorrResult spearman(std::span<const double> x, std::span<const double> y);

// average ranks (exposed for the rank-based oracle comparisons)
std::vector<double> average_ranks(std::span<const double> x);

// ---------------------------------------------------------------------------
// Box-Cox
// ---------------------------------------------------------------------------

struct BoxCoxResult {
    double lambda = 1.0;
    double shift = 0.0;  // added before transforming when min(y) <= 0
    double loglik = 0.0;
    std::vector<double> transformed;
};

// Profile-likelihood grid search over lambda in [-2, 2], step 0.01. When
// min(y) <= 0 the series is first shifted by (1 - min(y)). Throws StatError
// on constant input.
BoxCoxResult boxcox(std::span<const double> y);

// transform only, for a fixed lambda (values must already be positive)
std::vector<double> boxcox_apply(std::span<const double> y, double lambda);

// profile log-likelihood of one lambda on positive values
double boxcox_loglik(std::span<const double> y, double lambda);

// ---------------------------------------------------------------------------
// Benjamini-Hochberg
// ---------------------------------------------------------------------------

// Step-up adjustment: q_(i) = min_{j >= i} min(1, p_(j) * m / j), returned in
// the input order. Throws StatError when a value is outside [0, 1].
std::vector<double> bh_adjust(std::span<const double> p);

// ---------------------------------------------------------------------------
// Kruskal-Wallis
// ---------------------------------------------------------------------------

struct KruskalResult {
    double h = 0.0;  // tie-corrected statistic
    double p = 1.0;  // chi-square reference, k-1 df
};

// Returns p = 1 when every observation is tied. Throws StatError for fewer
// than two non-empty groups.
KruskalResult kruskal_wallis(std::span<const std::vector<double>> groups);

// ---------------------------------------------------------------------------
// Small shared helpers
// ---------------------------------------------------------------------------

double skewness(std::span<const double> x);  // m3 / m2^1.5

}  // namespace sleepassoc
