#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace incpref {

// Failure of a numerical procedure on valid input (non-convergence, lost monotonicity).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sample mean / standard error accumulator. merge() is order-sensitive in floating
// point, so callers reduce per-block partials in block order.
struct Stats {
    double n = 0.0;
    double sum = 0.0;
    double sumsq = 0.0;

    void add(double x) {
        n += 1.0;
        sum += x;
        sumsq += x * x;
    }
    void merge(const Stats& o) {
        n += o.n;
        sum += o.sum;
        sumsq += o.sumsq;
    }
    double mean() const { return n > 0 ? sum / n : 0.0; }
    double variance() const;
    double stderr() const { return n > 1 ? std::sqrt(variance() / n) : 0.0; }
};

// Fixed block decomposition of [0, n). Block b always covers the same items, so
// any per-block result is independent of the thread count.
constexpr std::size_t kBlockSize = 64;

// Runs body(begin, end, block) over all blocks using up to `threads` workers.
void parallel_blocks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

// Per-item Stats reduced in block order.
Stats parallel_stats(std::size_t n, int threads, const std::function<double(std::size_t)>& item);

// Root of a strictly monotone f on (lo, hi) searched in log space; the bracket is
// expanded by doubling log-width until a sign change is found (at most max_expand times).
// Stops when the relative bracket width is below rel_tol.
double monotone_root_log(const std::function<double(double)>& f, double lo, double hi,
                         double rel_tol = 1e-15, int max_expand = 200, int max_iter = 400);

// Composite trapezoid rule on a uniform grid of values with spacing h.
double trapezoid(const std::vector<double>& values, double h);

}  // namespace incpref
