#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace sleepassoc::kernels {

// Vector reduction kernels behind the numeric inner loops (mixed-model
// sufficient statistics, Box-Cox grid scans, windowed aggregation).
// Each kernel exists as a scalar reference implementation plus SIMD
// variants; the active variant is selected once at startup from CPU
// capabilities. SIMD variants are equivalence-tested against the scalar
// reference in tests/test_kernels.cpp.
struct Variant {
    std::string_view name;
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
};

// All variants usable on this CPU; index 0 is always the scalar reference.
std::span<const Variant> variants();

// The variant the convenience wrappers below dispatch to.
const Variant& active();

inline double sum(std::span<const double> x) {
    return active().sum(x.data(), x.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline double sumsq(std::span<const double> x) {
    return active().dot(x.data(), x.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), x.size());
}

double mean(std::span<const double> x);

// two-pass, n-1 denominator
double sample_variance(std::span<const double> x);
double sample_stddev(std::span<const double> x);

}  // namespace sleepassoc::kernels
