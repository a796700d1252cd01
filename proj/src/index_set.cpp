#include "incpref/index_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "incpref/numerics.hpp"

namespace incpref {

namespace {

Box scaled(const Box& b, double s) {
    std::vector<double> lo(b.dim()), hi(b.dim());
    for (std::size_t k = 0; k < b.dim(); ++k) {
        lo[k] = std::min(b.lo(k) * s, b.hi(k) * s);
        hi[k] = std::max(b.lo(k) * s, b.hi(k) * s);
    }
    return Box(std::move(lo), std::move(hi));
}

Box zero_box(std::size_t d) { return Box::point(std::vector<double>(d, 0.0)); }

void check_dim(const std::vector<double>& v, std::size_t d, const char* what) {
    if (v.size() != d)
        throw std::runtime_error(std::string("selector evaluation failure: ") + what + " returned dimension " +
                                 std::to_string(v.size()) + ", expected " + std::to_string(d));
    for (double x : v)
        if (!std::isfinite(x)) throw std::runtime_error(std::string("selector evaluation failure: ") + what + " non-finite");
}

}  // namespace

Selector constant_selector(std::vector<double> v) {
    return [v = std::move(v)](const PathState&) { return v; };
}

void IndexSetConfig::validate() const {
    if (range.dim() != d) throw std::invalid_argument("index set: range dimension mismatch");
    for (const auto& c : components) {
        if (c.i0.dim() != d) throw std::invalid_argument("index set: component " + std::to_string(c.q) + " dimension mismatch");
        if (c.drift.empty() || c.diffusion.empty())
            throw std::invalid_argument("index set: component " + std::to_string(c.q) + " needs nonempty selector lists");
    }
}

std::vector<Box> euler_component(const ComponentConfig& cfg, const BrownianPath& path, std::size_t K) {
    if (path.grid.steps != K) throw std::invalid_argument("euler_component: grid does not match path");
    const std::size_t d = cfg.i0.dim();
    const double dt = path.grid.dt();
    std::vector<Box> seq;
    seq.reserve(K + 1);
    seq.push_back(cfg.i0);
    Box drift_acc = zero_box(d);
    std::vector<std::vector<double>> sums(cfg.diffusion.size(), std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> drifts(cfg.drift.size());
    for (std::size_t l = 0; l < K; ++l) {
        const PathState st{path, l, path.grid.time(l), seq.back()};
        for (std::size_t k = 0; k < cfg.drift.size(); ++k) {
            drifts[k] = cfg.drift[k](st);
            check_dim(drifts[k], d, "drift selector");
        }
        drift_acc = minkowski_sum(drift_acc, scaled(bounding_box(drifts), dt));
        const double dw = path.w[l + 1] - path.w[l];
        for (std::size_t k = 0; k < cfg.diffusion.size(); ++k) {
            const auto g = cfg.diffusion[k](st);
            check_dim(g, d, "diffusion selector");
            for (std::size_t j = 0; j < d; ++j) sums[k][j] += g[j] * dw;
        }
        seq.push_back(minkowski_sum(minkowski_sum(cfg.i0, drift_acc), bounding_box(sums)));
    }
    return seq;
}

IndexSetPath assemble(const IndexSetConfig& cfg, const BrownianPath& path, std::size_t K) {
    cfg.validate();
    const auto i1 = euler_component(cfg.components[0], path, K);
    const auto i2 = euler_component(cfg.components[1], path, K);
    const auto i3 = euler_component(cfg.components[2], path, K);
    IndexSetPath out;
    out.grid = path.grid;
    out.sets.reserve(K + 1);
    Box inter = i2[0];
    bool frozen = inter.is_singleton(kSingletonTol);
    if (frozen) out.stop_index = 0;
    Box hull = i3[0];
    for (std::size_t l = 0; l <= K; ++l) {
        if (l > 0 && !frozen) {
            const MaybeBox next = intersect(inter, i2[l]);
            if (!next) throw std::runtime_error("assemble: running intersection of component 2 is empty at index " + std::to_string(l));
            inter = *next;
            if (inter.is_singleton(kSingletonTol)) {
                frozen = true;
                out.stop_index = l;
            }
        }
        if (l > 0) hull = bounding_hull(hull, i3[l]);
        const MaybeBox set = intersect(cfg.range, minkowski_sum(minkowski_sum(i1[l], inter), hull));
        if (!set) throw std::runtime_error("assemble: index set empty after intersection with range at index " + std::to_string(l));
        out.sets.push_back(*set);
    }
    return out;
}

IndexSetConfig example2_index_config(double lambda) {
    IndexSetConfig cfg;
    cfg.d = 1;
    const double inf = std::numeric_limits<double>::infinity();
    cfg.range = Box::interval(0.0, inf);
    cfg.components[0] = {1, Box::point({0.0}), {constant_selector({0.0})}, {constant_selector({0.0})}};
    cfg.components[1] = {2, Box::point({0.0}), {constant_selector({0.0})}, {constant_selector({0.0})}};
    cfg.components[2] = {3, Box::interval(0.0, 1.0), {constant_selector({0.0})},
                         {constant_selector({0.0}), constant_selector({lambda})}};
    return cfg;
}

IndexSetConfig example3_index_config(double lambda, const MarketParams& market) {
    IndexSetConfig cfg;
    cfg.d = 2;
    const double inf = std::numeric_limits<double>::infinity();
    cfg.range = Box({0.0, 1.0}, {inf, inf});
    const double kappa = market.kappa, vs = market.varsigma;
    // Euler volatility carried as the (singleton) second coordinate of component 1
    Selector drift = [kappa, vs](const PathState& s) {
        const double sig = s.current.lo(1);
        const double ls = std::log(std::max(sig, std::numeric_limits<double>::min()));
        return std::vector<double>{0.0, sig * (0.5 * vs * vs - kappa * ls)};
    };
    Selector diff = [vs](const PathState& s) { return std::vector<double>{0.0, vs * s.current.lo(1)}; };
    cfg.components[0] = {1, Box::point({0.0, market.sigma0}), {drift}, {diff}};
    cfg.components[1] = {2, Box::point({0.0, 0.0}), {constant_selector({0.0, 0.0})}, {constant_selector({0.0, 0.0})}};
    cfg.components[2] = {3, Box({0.0, 1.0}, {1.0, 2.0}), {constant_selector({0.0, 0.0})},
                         {constant_selector({0.0, 0.0}), constant_selector({lambda, 0.0})}};
    return cfg;
}

IndexSetPath exact_index_set(int example, const BrownianPath& path, double lambda, std::span<const double> vol) {
    IndexSetPath out;
    out.grid = path.grid;
    const std::size_t K = path.grid.steps;
    out.sets.reserve(K + 1);
    if (example == 2) {
        for (std::size_t l = 0; l <= K; ++l) out.sets.push_back(Box::interval(0.0, lambda * path.wmax[l] + 1.0));
    } else if (example == 3) {
        if (vol.size() != K + 1) throw std::invalid_argument("exact_index_set: example 3 needs a volatility path");
        for (std::size_t l = 0; l <= K; ++l)
            out.sets.push_back(Box({0.0, vol[l] + 1.0}, {lambda * path.wmax[l] + 1.0, vol[l] + 2.0}));
    } else {
        throw std::invalid_argument("exact_index_set: unknown example id " + std::to_string(example));
    }
    return out;
}

double closure_gap(const CastaingFamily& family, const IndexSetPath& sets) {
    if (family.selectors.empty()) throw std::invalid_argument("closure_gap: empty family");
    double gap = 0.0;
    std::vector<std::vector<double>> pts(family.selectors.size());
    for (std::size_t l = 0; l < sets.sets.size(); ++l) {
        for (std::size_t k = 0; k < family.selectors.size(); ++k) pts[k] = family.selectors[k].at(l);
        gap = std::max(gap, hausdorff(sets.sets[l], bounding_box(pts)));
    }
    return gap;
}

std::vector<ConvergenceRow> convergence_study(const IndexSetConfig& cfg, const ConvergenceSetup& setup) {
    for (std::size_t K : setup.K_list)
        if (K == 0 || setup.K_ref % K != 0)
            throw std::invalid_argument("convergence_study: K_ref " + std::to_string(setup.K_ref) +
                                        " is not a multiple of K = " + std::to_string(K));
    const TimeGrid fine(setup.t, setup.K_ref);
    const std::size_t nk = setup.K_list.size();
    std::vector<double> dh(setup.n_paths * nk);
    parallel_blocks(setup.n_paths, setup.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            const BrownianPath fp = sample_path(fine, {setup.seed, i});
            std::vector<double> vol;
            if (setup.example == 3) vol = exp_ou_vol(fp, setup.market);
            const Box exact = exact_index_set(setup.example, fp, setup.lambda, vol).sets.back();
            for (std::size_t k = 0; k < nk; ++k) {
                const BrownianPath cp = restrict_path(fp, setup.K_list[k]);
                const IndexSetPath approx = assemble(cfg, cp, setup.K_list[k]);
                dh[i * nk + k] = hausdorff(exact, approx.sets.back());
            }
        }
    });
    std::vector<ConvergenceRow> rows;
    for (std::size_t k = 0; k < nk; ++k) {
        Stats s;
        for (std::size_t i = 0; i < setup.n_paths; ++i) s.add(dh[i * nk + k]);
        rows.push_back({setup.K_list[k], s.mean(), s.stderr(), setup.n_paths, setup.seed});
    }
    return rows;
}

}  // namespace incpref
