#include "incpref/numerics.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <thread>

namespace incpref {

double Stats::variance() const {
    if (n < 2) return 0.0;
    const double m = sum / n;
    return std::max(0.0, (sumsq - n * m * m) / (n - 1.0));
}

void parallel_blocks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    const std::size_t nb = block_count(n);
    auto run_block = [&](std::size_t b) {
        const std::size_t begin = b * kBlockSize;
        body(begin, std::min(n, begin + kBlockSize), b);
    };
    const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), nb);
    if (workers <= 1) {
        for (std::size_t b = 0; b < nb; ++b) run_block(b);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t b = w; b < nb; b += workers) run_block(b);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

Stats parallel_stats(std::size_t n, int threads, const std::function<double(std::size_t)>& item) {
    std::vector<Stats> partial(block_count(n));
    parallel_blocks(n, threads, [&](std::size_t begin, std::size_t end, std::size_t b) {
        Stats s;
        for (std::size_t i = begin; i < end; ++i) s.add(item(i));
        partial[b] = s;
    });
    Stats total;
    for (const auto& s : partial) total.merge(s);
    return total;
}

double monotone_root_log(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                         int max_expand, int max_iter) {
    if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("monotone_root_log: need 0 < lo < hi");
    auto g = [&](double z) { return f(std::exp(z)); };
    double a = std::log(lo), b = std::log(hi);
    double fa = g(a), fb = g(b);
    int expand = 0;
    while (fa * fb > 0.0) {
        if (++expand > max_expand) throw NumericalError("monotone_root_log: bracket not found");
        const double w = b - a;
        // move toward the side where the sign change must lie
        if (std::abs(fa) < std::abs(fb)) {
            b = a;
            fb = fa;
            a -= 2.0 * w;
            fa = g(a);
        } else {
            a = b;
            fa = fb;
            b += 2.0 * w;
            fb = g(b);
        }
    }
    if (fa == 0.0) return std::exp(a);
    if (fb == 0.0) return std::exp(b);
    std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
    auto tol = [rel_tol](double x, double y) { return std::abs(y - x) <= rel_tol; };
    const auto r = boost::math::tools::toms748_solve(g, a, b, fa, fb, tol, iters);
    return std::exp(0.5 * (r.first + r.second));
}

double trapezoid(const std::vector<double>& values, double h) {
    if (values.size() < 2) return 0.0;
    double s = 0.5 * (values.front() + values.back());
    for (std::size_t k = 1; k + 1 < values.size(); ++k) s += values[k];
    return s * h;
}

}  // namespace incpref
