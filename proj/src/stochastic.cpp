#include "incpref/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "incpref/numerics.hpp"
#include "incpref/rng.hpp"

namespace incpref {

TimeGrid::TimeGrid(double horizon_, std::size_t steps_) : horizon(horizon_), steps(steps_) {
    if (steps == 0) throw std::invalid_argument("TimeGrid: steps must be >= 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be > 0");
}

void MarketParams::validate() const {
    if (!(r >= 0.0)) throw std::invalid_argument("market: r must be >= 0");
    if (!(sigma0 > 0.0)) throw std::invalid_argument("market: sigma0 must be > 0");
    if (!(kappa >= 0.0)) throw std::invalid_argument("market: kappa must be >= 0");
    if (!std::isfinite(mu) || !std::isfinite(varsigma)) throw std::invalid_argument("market: non-finite parameter");
}

BrownianPath sample_path(const TimeGrid& grid, Seed seed) {
    if (grid.steps == 0) throw std::invalid_argument("sample_path: K = 0");
    const std::size_t K = grid.steps;
    const double sq = std::sqrt(grid.dt());
    BrownianPath p;
    p.grid = grid;
    p.w.resize(K + 1);
    p.wmax.resize(K + 1);
    p.ou_noise.resize(K);
    NormalStream inc(seed.master, seed.index, StreamTag::increments);
    NormalStream aux(seed.master, seed.index, StreamTag::ou_aux);
    p.w[0] = 0.0;
    p.wmax[0] = 0.0;
    for (std::size_t l = 0; l < K; ++l) {
        p.w[l + 1] = p.w[l] + sq * inc.next();
        p.wmax[l + 1] = std::max(p.wmax[l], p.w[l + 1]);
    }
    aux.fill(p.ou_noise);
    return p;
}

BrownianPath restrict_path(const BrownianPath& fine, std::size_t coarse_steps) {
    if (coarse_steps == 0 || fine.grid.steps % coarse_steps != 0)
        throw std::invalid_argument("restrict_path: " + std::to_string(coarse_steps) + " does not divide " +
                                    std::to_string(fine.grid.steps));
    const std::size_t f = fine.grid.steps / coarse_steps;
    BrownianPath c;
    c.grid = TimeGrid(fine.grid.horizon, coarse_steps);
    c.w = subsample(fine.w, f);
    c.wmax.resize(c.w.size());
    c.wmax[0] = c.w[0];
    for (std::size_t l = 1; l < c.w.size(); ++l) c.wmax[l] = std::max(c.wmax[l - 1], c.w[l]);
    return c;
}

std::vector<double> subsample(std::span<const double> fine, std::size_t factor) {
    if (factor == 0 || (fine.size() - 1) % factor != 0) throw std::invalid_argument("subsample: bad factor");
    std::vector<double> out((fine.size() - 1) / factor + 1);
    for (std::size_t l = 0; l < out.size(); ++l) out[l] = fine[l * factor];
    return out;
}

OuStep ou_step(double kappa, double dt) {
    if (kappa == 0.0) return {1.0, 1.0, 0.0};
    const double em1 = -std::expm1(-kappa * dt);          // 1 - e^{-k dt}
    const double cov = em1 / kappa;                       // Cov(J, dW)
    const double var = -std::expm1(-2.0 * kappa * dt) / (2.0 * kappa);
    const double b2 = var - cov * cov / dt;
    return {1.0 - em1, cov / dt, std::sqrt(std::max(0.0, b2))};
}

std::vector<double> exp_ou_vol(const BrownianPath& path, const MarketParams& params) {
    if (params.vol_model != VolModel::exp_ou) throw std::invalid_argument("exp_ou_vol: vol_model is not exp_ou");
    const std::size_t K = path.grid.steps;
    const OuStep st = ou_step(params.kappa, path.grid.dt());
    if (st.b > 0.0 && params.varsigma != 0.0 && path.ou_noise.size() != K)
        throw std::invalid_argument("exp_ou_vol: path carries no auxiliary noise (restricted path?)");
    std::vector<double> sig(K + 1);
    double x = std::log(params.sigma0);
    sig[0] = params.sigma0;
    for (std::size_t l = 0; l < K; ++l) {
        const double dw = path.w[l + 1] - path.w[l];
        double j = st.a * dw;
        if (st.b > 0.0 && params.varsigma != 0.0) j += st.b * path.ou_noise[l];
        x = st.decay * x + params.varsigma * j;
        sig[l + 1] = std::exp(x);
    }
    return sig;
}

std::vector<double> volatility_path(const BrownianPath& path, const MarketParams& params) {
    if (params.vol_model == VolModel::exp_ou) return exp_ou_vol(path, params);
    return std::vector<double>(path.grid.steps + 1, params.sigma0);
}

std::vector<double> state_price_density(std::span<const double> w, double dt, const MarketParams& params,
                                        std::span<const double> vol) {
    if (vol.size() != w.size()) throw std::invalid_argument("state_price_density: vol/path size mismatch");
    std::vector<double> xi(w.size());
    double lx = 0.0;
    xi[0] = 1.0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        if (!(vol[l] > 0.0)) throw std::invalid_argument("state_price_density: sigma <= 0 at index " + std::to_string(l));
        const double th = params.theta(vol[l]);
        lx += -(params.r + 0.5 * th * th) * dt - th * (w[l + 1] - w[l]);
        xi[l + 1] = std::exp(lx);
    }
    return xi;
}

std::vector<double> state_price_density(const BrownianPath& path, const MarketParams& params) {
    const auto vol = volatility_path(path, params);
    return state_price_density(path.w, path.grid.dt(), params, vol);
}

std::vector<double> gbm_asset(const BrownianPath& path, const MarketParams& params, double s0) {
    if (!(s0 > 0.0)) throw std::invalid_argument("gbm_asset: s0 must be > 0");
    const std::size_t K = path.grid.steps;
    const double dt = path.grid.dt();
    std::vector<double> s(K + 1);
    s[0] = s0;
    if (params.vol_model == VolModel::constant) {
        const double sg = params.sigma0;
        for (std::size_t l = 1; l <= K; ++l)
            s[l] = s0 * std::exp((params.mu - 0.5 * sg * sg) * path.grid.time(l) + sg * path.w[l]);
        return s;
    }
    const auto vol = exp_ou_vol(path, params);
    double ls = std::log(s0);
    for (std::size_t l = 0; l < K; ++l) {
        ls += (params.mu - 0.5 * vol[l] * vol[l]) * dt + vol[l] * (path.w[l + 1] - path.w[l]);
        s[l + 1] = std::exp(ls);
    }
    return s;
}

double joint_density_max_bm(double x1, double x2, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("joint_density_max_bm: t must be > 0");
    if (x1 < 0.0 || x1 < x2) return 0.0;
    const double z = 2.0 * x1 - x2;
    return std::sqrt(2.0 / (std::numbers::pi * t * t * t)) * z * std::exp(-z * z / (2.0 * t));
}

ScenarioSet simulate_scenarios(const TimeGrid& grid, const MarketParams& market, std::uint64_t seed,
                               std::size_t n_paths, int threads, std::size_t first_index,
                               std::size_t fine_factor) {
    market.validate();
    if (fine_factor == 0) throw std::invalid_argument("simulate_scenarios: fine_factor must be >= 1");
    ScenarioSet s;
    s.grid = grid;
    s.market = market;
    s.seed = seed;
    s.first_index = first_index;
    s.n_paths = n_paths;
    const std::size_t n = n_paths * s.stride();
    s.w.resize(n);
    s.wmax.resize(n);
    s.sigma.resize(n);
    s.xi.resize(n);
    const TimeGrid fine(grid.horizon, grid.steps * fine_factor);
    parallel_blocks(n_paths, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            const BrownianPath fp = sample_path(fine, {seed, first_index + i});
            const auto fvol = volatility_path(fp, market);
            const BrownianPath p = fine_factor == 1 ? fp : restrict_path(fp, grid.steps);
            const auto vol = fine_factor == 1 ? fvol : subsample(fvol, fine_factor);
            const auto xi = state_price_density(p.w, grid.dt(), market, vol);
            const std::size_t off = i * s.stride();
            std::copy(p.w.begin(), p.w.end(), s.w.begin() + off);
            std::copy(p.wmax.begin(), p.wmax.end(), s.wmax.begin() + off);
            std::copy(vol.begin(), vol.end(), s.sigma.begin() + off);
            std::copy(xi.begin(), xi.end(), s.xi.begin() + off);
        }
    });
    return s;
}

}  // namespace incpref
