#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "incpref/geometry.hpp"

namespace testsupport {

inline incpref::Box random_box(std::mt19937_64& g, std::size_t d, double scale = 5.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> lo(d), hi(d);
    for (std::size_t k = 0; k < d; ++k) {
        double a = u(g), b = u(g);
        lo[k] = std::min(a, b);
        hi[k] = std::max(a, b);
    }
    return incpref::Box(lo, hi);
}

// Asymptotic Kolmogorov distribution tail: P(sqrt(n) D > x)
inline double kolmogorov_tail(double x) {
    if (x < 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * x * x);
    return std::clamp(s, 0.0, 1.0);
}

// Two-sample KS p-value (asymptotic with the usual small-sample correction)
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    const double en = std::sqrt(n * m / (n + m));
    return kolmogorov_tail((en + 0.12 + 0.11 / en) * d);
}

}  // namespace testsupport
