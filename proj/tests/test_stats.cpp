#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracle_helpers.hpp"
#include "sleepassoc/dists.hpp"
#include "sleepassoc/errors.hpp"
#include "sleepassoc/stats.hpp"

using namespace sleepassoc;

// ---------------------------------------------------------------------------
// distribution helpers
// ---------------------------------------------------------------------------

TEST_CASE("normal tail probabilities") {
    CHECK(norm_cdf(0.0) == doctest::Approx(0.5));
    CHECK(two_sided_p_from_z(0.0) == doctest::Approx(1.0));
    CHECK(two_sided_p_from_z(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(two_sided_p_from_z(-2.575829303548901) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("student t two-sided p") {
    // reference values from the t distribution (R: 2*pt(-t, df))
    CHECK(student_t_two_sided_p(2.0, 10.0) == doctest::Approx(0.07338803).epsilon(1e-6));
    CHECK(student_t_two_sided_p(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(student_t_two_sided_p(0.0, 5.0) == doctest::Approx(1.0));
    CHECK(student_t_two_sided_p(12.0, 3.0) == doctest::Approx(0.001246687).epsilon(1e-5));
}

TEST_CASE("chi-square survival") {
    // R: pchisq(q, df, lower.tail=FALSE)
    CHECK(chi2_sf(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi2_sf(5.991464547107979, 2.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi2_sf(0.0, 3.0) == doctest::Approx(1.0));
}

// ---------------------------------------------------------------------------
// Spearman
// ---------------------------------------------------------------------------

TEST_CASE("spearman: perfect monotone and antitone") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> y = {2, 4, 6, 8, 10};
    CHECK(spearman(x, y).r == doctest::Approx(1.0));

    const std::vector<double> a = {1, 2, 3, 4};
    const std::vector<double> b = {4, 3, 2, 1};
    CHECK(spearman(a, b).r == doctest::Approx(-1.0));
}

TEST_CASE("spearman: average ranks under ties") {
    const std::vector<double> x = {1, 2, 2, 4};
    const std::vector<double> y = {1, 3, 2, 4};
    const auto rx = average_ranks(x);
    CHECK(rx == std::vector<double>{1.0, 2.5, 2.5, 4.0});
    const CorrResult res = spearman(x, y);
    CHECK(res.r == oracle::brute_force_spearman(x, y));  // exact
    CHECK(res.r == doctest::Approx(std::sqrt(0.9)).epsilon(1e-15));
}

TEST_CASE("spearman: exact oracle agreement with ties, 400 random vectors") {
    Rng rng(0x5EA1);
    for (int rep = 0; rep < 400; ++rep) {
        const std::size_t n = 4 + rng.uniform_int(40);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid forces plenty of ties
            x[i] = std::floor(rng.uniform(0.0, 6.0));
            y[i] = std::floor(rng.uniform(0.0, 6.0));
        }
        // skip degenerate zero-variance draws
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
        if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) continue;
        CHECK(spearman(x, y).r == oracle::brute_force_spearman(x, y));
    }
}

TEST_CASE("spearman: rank invariance under strictly increasing transforms") {
    Rng rng(0x7AB5);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 5 + rng.uniform_int(30);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(-3.0, 3.0);
            y[i] = rng.uniform(-3.0, 3.0);
        }
        std::vector<double> tx(n), ty(n);
        for (std::size_t i = 0; i < n; ++i) {
            tx[i] = std::exp(x[i]);           // strictly increasing
            ty[i] = y[i] * 7.0 + 11.0;        // affine increasing
        }
        CHECK(spearman(x, y).r == spearman(tx, ty).r);  // exact
    }
}

TEST_CASE("spearman: statistics and CI construction") {
    Rng rng(0xD1CE);
    const std::size_t n = 200;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform();
        y[i] = 0.7 * x[i] + 0.3 * rng.uniform();
    }
    const CorrResult res = spearman(x, y);
    const double nn = static_cast<double>(n);
    CHECK(res.stat_fisher_z == doctest::Approx(std::atanh(res.r) * std::sqrt(nn - 3.0)));
    CHECK(res.stat_t ==
          doctest::Approx(res.r * std::sqrt((nn - 2.0) / (1.0 - res.r * res.r))));
    CHECK(res.ci_lo == doctest::Approx(std::tanh(std::atanh(res.r) - 1.96 / std::sqrt(nn - 3.0))));
    CHECK(res.ci_hi == doctest::Approx(std::tanh(std::atanh(res.r) + 1.96 / std::sqrt(nn - 3.0))));
    CHECK(res.ci_lo >= -1.0);
    CHECK(res.ci_hi <= 1.0);
    CHECK(res.p > 0.0);
    CHECK(res.p < 1e-6);  // strong correlation, large n
}

TEST_CASE("spearman: error paths") {
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}),
                    StatError);
    CHECK_THROWS_AS(
        spearman(std::vector<double>{1, 1, 1, 1}, std::vector<double>{1, 2, 3, 4}),
        StatError);
}

// ---------------------------------------------------------------------------
// Benjamini-Hochberg
// ---------------------------------------------------------------------------

TEST_CASE("bh: worked example") {
    const std::vector<double> p = {0.01, 0.02, 0.03, 0.04};
    const auto q = bh_adjust(p);
    for (double v : q) CHECK(v == doctest::Approx(0.04).epsilon(1e-15));
}

TEST_CASE("bh: no-signal and single-test cases") {
    const std::vector<double> ones = {1.0, 1.0, 1.0};
    for (double v : bh_adjust(ones)) CHECK(v == 1.0);
    const std::vector<double> single = {0.03};
    CHECK(bh_adjust(single)[0] == doctest::Approx(0.03));
}

TEST_CASE("bh: matches the literal step-up definition on random vectors") {
    Rng rng(0xB41234);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t m = 1 + rng.uniform_int(40);
        std::vector<double> p(m);
        for (auto& v : p) {
            v = rng.uniform();
            if (rng.bernoulli(0.2)) v = std::floor(v * 10.0) / 10.0;  // ties
        }
        const auto got = bh_adjust(p);
        const auto want = oracle::brute_force_bh(p);
        for (std::size_t i = 0; i < m; ++i) CHECK(got[i] == want[i]);  // exact

        // monotonicity in the raw ordering, and adjusted >= raw
        for (std::size_t i = 0; i < m; ++i) {
            CHECK(got[i] >= p[i]);
            CHECK(got[i] <= 1.0);
            for (std::size_t j = 0; j < m; ++j) {
                if (p[i] < p[j]) CHECK(got[i] <= got[j]);
            }
        }
    }
}

TEST_CASE("bh: rejects values outside [0,1]") {
    CHECK_THROWS_AS(bh_adjust(std::vector<double>{0.5, 1.5}), StatError);
    CHECK_THROWS_AS(bh_adjust(std::vector<double>{-0.1}), StatError);
}

// ---------------------------------------------------------------------------
// Box-Cox
// ---------------------------------------------------------------------------

TEST_CASE("boxcox: lognormal sample recovers lambda near 0") {
    Rng rng(0xB0C5);
    std::vector<double> y(800);
    for (auto& v : y) v = std::exp(rng.normal(0.0, 1.0));
    const BoxCoxResult res = boxcox(y);
    CHECK(std::fabs(res.lambda) <= 0.05);

    // finer-grid oracle: the coarse argmax is within one coarse step
    double best_ll = -1e300, best_lambda = 0.0;
    for (int k = 0; k <= 4000; ++k) {
        const double lambda = -2.0 + static_cast<double>(k) / 1000.0;
        const double ll = boxcox_loglik(y, lambda);
        if (ll > best_ll) {
            best_ll = ll;
            best_lambda = lambda;
        }
    }
    CHECK(std::fabs(res.lambda - best_lambda) <= 0.01 + 1e-12);
}

TEST_CASE("boxcox: lambda=1 is an exact shift") {
    const std::vector<double> y = {3.0, 5.0, 7.5, 9.25};
    const auto z = boxcox_apply(y, 1.0);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(z[i] == y[i] - 1.0);
}

TEST_CASE("boxcox: zero and negative values trigger the shift rule") {
    const std::vector<double> y = {0.0, 1.0, 2.0, 5.0};
    const BoxCoxResult res = boxcox(y);
    CHECK(res.shift == 1.0);
    // transformed values come from the shifted series, all positive
    for (double v : res.transformed) CHECK(std::isfinite(v));

    const std::vector<double> neg = {-2.0, 1.0, 4.0};
    CHECK(boxcox(neg).shift == 3.0);
}

TEST_CASE("boxcox: constant input is degenerate") {
    CHECK_THROWS_AS(boxcox(std::vector<double>{2.0, 2.0, 2.0}), StatError);
    CHECK_THROWS_AS(boxcox(std::vector<double>{}), StatError);
}

TEST_CASE("boxcox: transform matches its own lambda on the shifted series") {
    Rng rng(0xABCD);
    std::vector<double> y(200);
    for (auto& v : y) v = rng.uniform(0.5, 20.0);
    const BoxCoxResult res = boxcox(y);
    REQUIRE(res.transformed.size() == y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double shifted = y[i] + res.shift;
        const double expect = res.lambda == 0.0
                                  ? std::log(shifted)
                                  : (std::pow(shifted, res.lambda) - 1.0) / res.lambda;
        CHECK(res.transformed[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

// ---------------------------------------------------------------------------
// Kruskal-Wallis
// ---------------------------------------------------------------------------

TEST_CASE("kruskal-wallis: known example with ties") {
    // scipy.stats.kruskal([1,2,3,4],[2,3,4,5],[5,6,7,8]) -> H=7.049..., p=0.0295
    const std::vector<std::vector<double>> groups = {
        {1, 2, 3, 4}, {2, 3, 4, 5}, {5, 6, 7, 8}};
    const KruskalResult res = kruskal_wallis(groups);
    CHECK(res.h == doctest::Approx(7.049382716).epsilon(1e-6));
    CHECK(res.p == doctest::Approx(0.02946610).epsilon(1e-4));
}

TEST_CASE("kruskal-wallis: identical groups give p near 1") {
    const std::vector<std::vector<double>> groups = {{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
    const KruskalResult res = kruskal_wallis(groups);
    CHECK(res.p > 0.9);
}

TEST_CASE("kruskal-wallis: all observations tied") {
    const std::vector<std::vector<double>> groups = {{2, 2}, {2, 2, 2}};
    const KruskalResult res = kruskal_wallis(groups);
    CHECK(res.h == 0.0);
    CHECK(res.p == 1.0);
}

TEST_CASE("kruskal-wallis: needs two non-empty groups") {
    CHECK_THROWS_AS(kruskal_wallis(std::vector<std::vector<double>>{{1.0, 2.0}, {}}),
                    StatError);
}

// ---------------------------------------------------------------------------
// skewness helper
// ---------------------------------------------------------------------------

TEST_CASE("skewness: symmetric ~0, exponential ~2") {
    Rng rng(0x55EE);
    std::vector<double> sym(20000), expo(20000);
    for (auto& v : sym) v = rng.normal();
    for (auto& v : expo) v = -std::log(1.0 - rng.uniform());
    CHECK(std::fabs(skewness(sym)) < 0.1);
    CHECK(skewness(expo) == doctest::Approx(2.0).epsilon(0.15));
}
