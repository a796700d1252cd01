#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "incpref/solver.hpp"

namespace incpref {

// lambda * erfc((wmax_t - w_t) / sqrt(2 dt)), the frozen running-maximum derivative.
double malliavin_running_max(double wmax_t, double w_t, double dt, double lambda);

// -varsigma * sum_{v=t}^{s-1} theta_v e^{-kappa (v-t) dt} (dW_v + theta_v dt) on the grid.
double h_xi_exp_ou(std::span<const double> w, std::span<const double> vol, std::size_t t_idx, std::size_t s_idx,
                   const MarketParams& params, double dt);

struct ConditionalEstimator {
    enum class Method { nested_mc, analytic_density };
    Method method = Method::nested_mc;
    std::size_t inner_samples = 100;
    std::uint64_t seed = 0;
};

struct PortfolioValue {
    double total = 0.0;
    double theta = 0.0;
    double hedge_H = 0.0;
    double hedge_P = 0.0;
    double indec = 0.0;
    // indec = indec_running_max + indec_volatility
    double indec_running_max = 0.0;
    double indec_volatility = 0.0;
    double stderr = 0.0;  // of the nested estimate of total
};

// Outer state at grid index t_idx of scenario `path`.
PortfolioValue pi_example1(const Problem& problem, const PolicySelector& selector, const ScenarioSet& paths,
                           std::size_t path, std::size_t t_idx, const ConditionalEstimator& est = {});
PortfolioValue pi_example2(const Problem& problem, const PolicySelector& selector, const ScenarioSet& paths,
                           std::size_t path, std::size_t t_idx, const ConditionalEstimator& est = {});
PortfolioValue pi_example3(const Problem& problem, const PolicySelector& selector, const ScenarioSet& paths,
                           std::size_t path, std::size_t t_idx, const ConditionalEstimator& est = {});
PortfolioValue portfolio_at(const Problem& problem, const PolicySelector& selector, const ScenarioSet& paths,
                            std::size_t path, std::size_t t_idx, const ConditionalEstimator& est = {});

// Portfolio along the first n_paths scenarios at every grid time (row-major, K+1 columns).
struct PortfolioSelector {
    Weight weight;
    std::size_t n_paths = 0;
    std::size_t stride = 0;
    std::vector<double> pi, theta, hedge_H, hedge_P, indec;
};

PortfolioSelector portfolio_paths(const Problem& problem, const PolicySelector& selector, const ScenarioSet& paths,
                                  std::size_t n_paths, const ConditionalEstimator& est = {}, int threads = 1);

struct Replication {
    double x_terminal = 0.0;
    double min_wealth = 0.0;
    double target = 0.0;
};

struct WealthPath {
    double x_terminal = 0.0;
    double min_wealth = 0.0;
};
// X_{l+1} = X_l e^{r dt} + (pi_l (mu - r) - C_l) dt + pi_l sigma_l (w_{l+1} - w_l); C and pi need K entries
WealthPath simulate_wealth(double x0, const MarketParams& market, double dt, std::span<const double> w,
                           std::span<const double> sigma, std::span<const double> C, std::span<const double> pi);

// Wealth under (c*, pi*) along scenario `path`; target is X*_T (0 without bequest).
Replication replicate(const Problem& problem, const PolicySelector& selector, const PortfolioSelector& portfolio,
                      const ScenarioSet& paths, std::size_t path);

}  // namespace incpref
