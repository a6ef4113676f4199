#include "sleepassoc/kernels.hpp"

#include <cmath>
#include <vector>

namespace sleepassoc::kernels {

namespace {

double scalar_sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double scalar_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void scalar_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

constexpr Variant kScalar{"scalar", scalar_sum, scalar_dot, scalar_axpy};

}  // namespace

// Provided by kernels_avx2.cpp / kernels_neon.cpp; null when the variant is
// not compiled in or the CPU lacks the instruction set.
const Variant* avx2_variant();
const Variant* neon_variant();

std::span<const Variant> variants() {
    static const std::vector<Variant> table = [] {
        std::vector<Variant> v{kScalar};
        if (const Variant* a = avx2_variant()) v.push_back(*a);
        if (const Variant* s = neon_variant()) v.push_back(*s);
        return v;
    }();
    return {table.data(), table.size()};
}

const Variant& active() {
    // last entry is the widest variant available on this CPU
    static const Variant& chosen = variants().back();
    return chosen;
}

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return sum(x) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    const double m = mean(x);
    // sumsq(x - m) computed as dot on a shifted copy keeps the kernel generic
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - m;
    return sumsq(d) / static_cast<double>(n - 1);
}

double sample_stddev(std::span<const double> x) {
    return std::sqrt(sample_variance(x));
}

}  // namespace sleepassoc::kernels
