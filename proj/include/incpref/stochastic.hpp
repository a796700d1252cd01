#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace incpref {

struct TimeGrid {
    double horizon = 1.0;
    std::size_t steps = 1;

    TimeGrid() = default;
    TimeGrid(double horizon, std::size_t steps);

    double dt() const { return horizon / static_cast<double>(steps); }
    double time(std::size_t l) const { return horizon * static_cast<double>(l) / static_cast<double>(steps); }
};

enum class VolModel { constant, exp_ou };

struct MarketParams {
    double r = 0.001;
    double mu = 0.02;
    double sigma0 = 0.36;
    double kappa = 0.0;
    double varsigma = 0.0;
    VolModel vol_model = VolModel::constant;

    void validate() const;
    double theta(double sigma) const { return (mu - r) / sigma; }
};

struct Seed {
    std::uint64_t master = 0;
    std::uint64_t index = 0;
};

struct BrownianPath {
    TimeGrid grid;
    std::vector<double> w;         // K+1, w[0] = 0
    std::vector<double> wmax;      // K+1, running grid maximum
    std::vector<double> ou_noise;  // K auxiliary normals for exact OU stepping; empty after restriction
};

BrownianPath sample_path(const TimeGrid& grid, Seed seed);
// Path on the coarse grid with steps/factor steps; wmax is recomputed as the coarse-grid maximum.
BrownianPath restrict_path(const BrownianPath& fine, std::size_t coarse_steps);
std::vector<double> subsample(std::span<const double> fine, std::size_t factor);

// Exact conditional-Gaussian OU stepping of log sigma.
std::vector<double> exp_ou_vol(const BrownianPath& path, const MarketParams& params);
// sigma path for either vol model (constant model gives a flat path)
std::vector<double> volatility_path(const BrownianPath& path, const MarketParams& params);

// Left-point Ito sums: log xi_{l+1} = log xi_l - (r + theta_l^2/2) dt - theta_l dW_l.
std::vector<double> state_price_density(const BrownianPath& path, const MarketParams& params);
std::vector<double> state_price_density(std::span<const double> w, double dt, const MarketParams& params,
                                        std::span<const double> vol);

std::vector<double> gbm_asset(const BrownianPath& path, const MarketParams& params, double s0);

// -zeta(1/2)/sqrt(2 pi): continuous minus grid-monitored Brownian maximum, per unit sqrt(dt)
constexpr double kMonitoringShift = 0.5825971579390106;

// Joint density of (max_{[0,t]} W, W_t).
double joint_density_max_bm(double x1, double x2, double t);

// Coefficients of the exact OU step: J = a dW + b Z over one step of length dt.
struct OuStep {
    double decay;  // e^{-kappa dt}
    double a;
    double b;
};
OuStep ou_step(double kappa, double dt);

// Row-major bundle of simulated scenarios used by the solver and portfolio code.
struct ScenarioSet {
    TimeGrid grid;
    MarketParams market;
    std::uint64_t seed = 0;
    std::size_t first_index = 0;
    std::size_t n_paths = 0;
    std::vector<double> w, wmax, sigma, xi;  // each n_paths x (K+1)

    std::size_t stride() const { return grid.steps + 1; }
    std::span<const double> w_row(std::size_t i) const { return {w.data() + i * stride(), stride()}; }
    std::span<const double> wmax_row(std::size_t i) const { return {wmax.data() + i * stride(), stride()}; }
    std::span<const double> sigma_row(std::size_t i) const { return {sigma.data() + i * stride(), stride()}; }
    std::span<const double> xi_row(std::size_t i) const { return {xi.data() + i * stride(), stride()}; }
};

// Paths first_index .. first_index+n_paths-1. With fine_factor > 1 each path is drawn on
// a grid fine_factor times finer and restricted; sigma is taken from the fine path.
ScenarioSet simulate_scenarios(const TimeGrid& grid, const MarketParams& market, std::uint64_t seed,
                               std::size_t n_paths, int threads, std::size_t first_index = 0,
                               std::size_t fine_factor = 1);

}  // namespace incpref
