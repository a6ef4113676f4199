#include "sleepassoc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sleepassoc/dists.hpp"
#include "sleepassoc/errors.hpp"
#include "sleepassoc/kernels.hpp"

namespace sleepassoc {

std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        // positions i..j (0-based) share the average 1-based rank
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

namespace {

// plain two-pass Pearson; kept scalar so the rank-based oracle reproduces it
// bit for bit
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        throw StatError("undefined correlation: zero rank variance");
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

CorrResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw StatError("spearman: length mismatch");
    const std::size_t n = x.size();
    if (n < 4) throw StatError("spearman: insufficient data (n < 4)");

    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);

    CorrResult res;
    res.n = static_cast<int>(n);
    res.r = pearson(rx, ry);

    const double nn = static_cast<double>(n);
    const double z = std::atanh(std::clamp(res.r, -1.0, 1.0));
    const double half = 1.96 / std::sqrt(nn - 3.0);
    res.ci_lo = std::tanh(z - half);
    res.ci_hi = std::tanh(z + half);
    res.stat_fisher_z = z * std::sqrt(nn - 3.0);
    const double denom = 1.0 - res.r * res.r;
    res.stat_t = denom > 0.0 ? res.r * std::sqrt((nn - 2.0) / denom)
                             : std::copysign(std::numeric_limits<double>::infinity(), res.r);
    res.p = student_t_two_sided_p(res.stat_t, nn - 2.0);
    return res;
}

std::vector<double> boxcox_apply(std::span<const double> y, double lambda) {
    std::vector<double> z(y.size());
    if (lambda == 0.0) {
        for (std::size_t i = 0; i < y.size(); ++i) z[i] = std::log(y[i]);
    } else {
        for (std::size_t i = 0; i < y.size(); ++i) {
            z[i] = (std::pow(y[i], lambda) - 1.0) / lambda;
        }
    }
    return z;
}

double boxcox_loglik(std::span<const double> y, double lambda) {
    const std::size_t n = y.size();
    const double nn = static_cast<double>(n);

    // z_i = (y^l - 1)/l via exp(l * ln y); the log terms are shared across
    // the whole grid scan so the caller-side cost stays in the reductions
    std::vector<double> z(n);
    double sum_log_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ly = std::log(y[i]);
        sum_log_y += ly;
        z[i] = lambda == 0.0 ? ly : std::expm1(lambda * ly) / lambda;
    }
    const double m = kernels::mean(z);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = z[i] - m;
    const double var_mle = kernels::sumsq(d) / nn;
    if (var_mle <= 0.0) return -std::numeric_limits<double>::infinity();
    return -0.5 * nn * std::log(var_mle) + (lambda - 1.0) * sum_log_y;
}

BoxCoxResult boxcox(std::span<const double> y) {
    if (y.empty()) throw StatError("boxcox: empty input");
    const double lo = *std::min_element(y.begin(), y.end());
    const double hi = *std::max_element(y.begin(), y.end());
    if (lo == hi) throw StatError("boxcox: degenerate (constant) input");

    BoxCoxResult res;
    std::vector<double> shifted(y.begin(), y.end());
    if (lo <= 0.0) {
        res.shift = 1.0 - lo;
        for (double& v : shifted) v += res.shift;
    }

    // grid [-2, 2] step 0.01 with integer indexing, so lambda = 0 is exact
    double best_ll = -std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k <= 400; ++k) {
        const double lambda = static_cast<double>(k - 200) / 100.0;
        const double ll = boxcox_loglik(shifted, lambda);
        if (ll > best_ll) {
            best_ll = ll;
            best_k = k;
        }
    }
    res.lambda = static_cast<double>(best_k - 200) / 100.0;
    res.loglik = best_ll;
    res.transformed = boxcox_apply(shifted, res.lambda);
    return res;
}

std::vector<double> bh_adjust(std::span<const double> p) {
    const std::size_t m = p.size();
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw StatError("bh_adjust: p-value outside [0,1]");
    }
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&p](std::size_t a, std::size_t b) { return p[a] < p[b]; });

    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t i = m; i-- > 0;) {
        const double q =
            std::min(1.0, p[idx[i]] * static_cast<double>(m) / static_cast<double>(i + 1));
        running = std::min(running, q);
        adjusted[idx[i]] = running;
    }
    return adjusted;
}

KruskalResult kruskal_wallis(std::span<const std::vector<double>> groups) {
    std::vector<double> all;
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) {
        if (g.empty()) continue;
        sizes.push_back(g.size());
        all.insert(all.end(), g.begin(), g.end());
    }
    if (sizes.size() < 2) throw StatError("kruskal_wallis: need at least two non-empty groups");

    const double n = static_cast<double>(all.size());
    const std::vector<double> ranks = average_ranks(all);

    KruskalResult res;
    double h = 0.0;
    std::size_t offset = 0;
    for (std::size_t gi = 0, g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) continue;
        const std::size_t sz = sizes[gi++];
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < sz; ++i) rank_sum += ranks[offset + i];
        h += rank_sum * rank_sum / static_cast<double>(sz);
        offset += sz;
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    // tie correction
    std::vector<double> sorted(all);
    std::sort(sorted.begin(), sorted.end());
    double tie_sum = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    const double correction = 1.0 - tie_sum / (n * n * n - n);
    if (correction <= 0.0) {
        // every observation tied: no evidence of any difference
        return {0.0, 1.0};
    }
    res.h = h / correction;
    res.p = chi2_sf(res.h, static_cast<double>(sizes.size() - 1));
    return res;
}

double skewness(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    if (x.size() < 3) return 0.0;
    const double m = kernels::mean(x);
    double m2 = 0.0, m3 = 0.0;
    for (double v : x) {
        const double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (m2 <= 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

}  // namespace sleepassoc
