#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "incpref/portfolio.hpp"

using namespace incpref;

namespace {

ScenarioSet scenarios(const Problem& pr, std::size_t n, std::size_t K, std::uint64_t seed = 5) {
    return simulate_scenarios(TimeGrid(pr.horizon, K), pr.market, seed, n, 1);
}

void check_additive(const PortfolioValue& v) {
    CHECK(std::abs(v.total - (v.theta + v.hedge_H + v.hedge_P + v.indec)) <= 1e-12 * (1.0 + std::abs(v.total)));
    CHECK(v.indec == v.indec_running_max + v.indec_volatility);
    CHECK(v.hedge_P == 0.0);
}

}  // namespace

TEST_CASE("running-maximum derivative") {
    CHECK(malliavin_running_max(0.3, 0.3, 0.01, 0.2) == 0.2);
    const double dt = 0.02, gap = std::sqrt(2.0 * dt);
    CHECK(malliavin_running_max(0.5 + gap, 0.5, dt, 0.2) == doctest::Approx(0.2 * 0.15729920705028513).epsilon(1e-15));
    CHECK(malliavin_running_max(0.1, 0.0, 1e-12, 0.2) == 0.0);
    CHECK_THROWS_AS(malliavin_running_max(0.1, 0.0, 0.0, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(malliavin_running_max(0.0, 0.1, 0.1, 0.2), std::invalid_argument);
}

TEST_CASE("H for exponential OU volatility on a four-step path") {
    MarketParams mk;
    mk.kappa = 0.5;
    mk.varsigma = -0.8;
    mk.vol_model = VolModel::exp_ou;
    const std::vector<double> w{0.0, 0.1, -0.05, 0.2, 0.15};
    const std::vector<double> vol{0.3, 0.35, 0.4, 0.32, 0.3};
    const double dt = 0.25;
    const double t1 = 0.019 / 0.35, t2 = 0.019 / 0.4, t3 = 0.019 / 0.32;
    const double expect = 0.8 * (t1 * (-0.15 + t1 * dt) + t2 * std::exp(-0.125) * (0.25 + t2 * dt) +
                                 t3 * std::exp(-0.25) * (-0.05 + t3 * dt));
    CHECK(h_xi_exp_ou(w, vol, 1, 4, mk, dt) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(h_xi_exp_ou(w, vol, 2, 2, mk, dt) == 0.0);
    mk.varsigma = 0.0;
    CHECK(h_xi_exp_ou(w, vol, 0, 4, mk, dt) == 0.0);
    CHECK_THROWS_AS(h_xi_exp_ou(w, vol, 3, 1, mk, dt), std::invalid_argument);
    CHECK_THROWS_AS(h_xi_exp_ou(w, vol, 0, 5, mk, dt), std::out_of_range);
}

TEST_CASE("example 1 closed-form portfolio") {
    for (auto e : {Example::ex1_case1, Example::ex1_case2}) {
        const auto pr = default_problem(e);
        const auto sc = scenarios(pr, 16, 200);
        const auto a = solve(pr, FiniteWeight{{0.3, 0.7}}, sc);
        const auto b = solve(pr, FiniteWeight{{0.9, 0.1}}, sc);
        const double theta = pr.theta(), rho = rho_p(pr.market.r, theta, 6.0);
        const auto v0 = portfolio_at(pr, a, sc, 0, 0);
        CHECK(v0.total == doctest::Approx(pr.x0 * theta / (6.0 * 0.36)).epsilon(1e-13));
        const double xi = sc.xi_row(3)[80], t = 0.4;
        const double expect = pr.x0 * theta * std::expm1(rho * (1 - t)) / (6.0 * 0.36 * std::pow(xi, 1.0 / 6.0) * std::expm1(rho));
        CHECK(portfolio_at(pr, a, sc, 3, 80).total == doctest::Approx(expect).epsilon(1e-12));
        CHECK(portfolio_at(pr, b, sc, 3, 80).total == doctest::Approx(expect).epsilon(1e-12));
        CHECK(portfolio_at(pr, a, sc, 3, 200).total == 0.0);
        check_additive(portfolio_at(pr, a, sc, 5, 17));
    }
}

TEST_CASE("case I replication liquidates wealth") {
    const auto pr = default_problem(Example::ex1_case1);
    const std::size_t n = 2000;
    const auto sc = scenarios(pr, n, 200);
    const auto sel = solve(pr, FiniteWeight{{0.5, 0.5}}, sc);
    const auto pf = portfolio_paths(pr, sel, sc, n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = replicate(pr, sel, pf, sc, i);
        CHECK(r.target == 0.0);
        mean += std::abs(r.x_terminal) / n;
    }
    CHECK(mean < 0.01 * pr.x0);
    const auto other = solve(pr, FiniteWeight{{0.2, 0.8}}, sc);
    CHECK_THROWS_AS(replicate(pr, other, pf, sc, 0), std::invalid_argument);
}

TEST_CASE("zero policy rolls wealth at the risk-free rate") {
    MarketParams mk;
    const std::size_t K = 50;
    const auto path = sample_path(TimeGrid(1.0, K), Seed{3, 0});
    const std::vector<double> sigma(K, 0.36), zero(K, 0.0);
    const auto wp = simulate_wealth(100.0, mk, 1.0 / K, path.w, sigma, zero, zero);
    CHECK(wp.x_terminal == doctest::Approx(100.0 * std::exp(mk.r)).epsilon(1e-13));
    CHECK(wp.min_wealth == 100.0);
    CHECK_THROWS_AS(simulate_wealth(100.0, mk, 1.0 / K, path.w, sigma, zero, std::vector<double>(K - 1)), std::invalid_argument);
}

TEST_CASE("example 2 at lambda 0 matches case II") {
    auto p2 = default_problem(Example::ex2);
    p2.family.lambda = 0.0;
    p2.family.beta = 0.0;
    auto p1 = default_problem(Example::ex1_case2);
    p1.family.chi = p2.family.chi_fn(1.0);
    const auto sc = scenarios(p2, 2000, 100);
    SolveOptions opt;
    opt.example2_quadrature = false;
    const auto a = solve(p2, FiniteWeight{{0.35, 0.65}}, sc, opt);
    const auto b = solve(p1, FiniteWeight{{0.65, 0.35}}, sc, opt);
    const double scale = std::pow(a.eta / b.eta, -1.0 / 6.0);
    ConditionalEstimator est;
    est.inner_samples = 400;
    for (std::size_t l : {0, 30, 90}) {
        const auto v = pi_example2(p2, a, sc, 4, l, est);
        const auto ref = pi_example1(p1, b, sc, 4, l);
        CHECK(v.indec == 0.0);
        CHECK(std::abs(v.total - ref.total * scale) < 2.0 * v.stderr);
        check_additive(v);
    }
}

TEST_CASE("example 2 components") {
    const auto pr = default_problem(Example::ex2);
    const auto sc = scenarios(pr, 64, 100);
    SolveOptions opt;
    opt.example2_quadrature = false;
    const auto sel = solve(pr, FiniteWeight{{0.4, 0.6}}, sc, opt);
    const auto none = solve(pr, FiniteWeight{{1.0, 0.0}}, sc, opt);
    for (std::size_t l : {0, 50}) {
        const auto v = portfolio_at(pr, sel, sc, 2, l);
        check_additive(v);
        CHECK(v.hedge_H == 0.0);
        CHECK(v.indec > 0.0);
        CHECK(portfolio_at(pr, none, sc, 2, l).indec == 0.0);
    }
    const auto v0 = portfolio_at(pr, sel, sc, 2, 0), vend = portfolio_at(pr, sel, sc, 2, 99);
    CHECK(std::abs(vend.total) < 0.05 * std::abs(v0.total));
    const auto pf = portfolio_paths(pr, sel, sc, 2);
    CHECK(pf.pi[100] == 0.0);
    CHECK(pf.indec[pf.stride + 100] == 0.0);

    // scaled weight gives the same selector and the same inner draws
    const auto scaled = solve(pr, FiniteWeight{{1.2, 1.8}}, sc, opt);
    CHECK(portfolio_at(pr, scaled, sc, 2, 50).total == doctest::Approx(portfolio_at(pr, sel, sc, 2, 50).total).epsilon(1e-12));
}

TEST_CASE("example 2 nested and density estimators agree") {
    const auto pr = default_problem(Example::ex2);
    const auto sc = scenarios(pr, 32, 100);
    SolveOptions opt;
    opt.example2_quadrature = false;
    const auto sel = solve(pr, FiniteWeight{{0.3, 0.7}}, sc, opt);
    ConditionalEstimator nested;
    nested.inner_samples = 4000;
    ConditionalEstimator density;
    density.method = ConditionalEstimator::Method::analytic_density;
    for (std::size_t l : {10, 60}) {
        const auto a = pi_example2(pr, sel, sc, 7, l, nested);
        const auto b = pi_example2(pr, sel, sc, 7, l, density);
        CHECK(std::abs(a.total - b.total) < 3.0 * a.stderr);
        check_additive(b);
    }
}

TEST_CASE("example 3 components") {
    auto pr = default_problem(Example::ex3);
    const auto sc = scenarios(pr, 32, 50);
    const auto w = tilt_weight(0.5, pr.i1_max, pr.i1_cells, 2.2);
    const auto sel = solve(pr, w, sc);
    ConditionalEstimator est;
    est.inner_samples = 50;
    const auto v = portfolio_at(pr, sel, sc, 1, 10, est);
    check_additive(v);
    CHECK(v.indec_volatility == 0.0);
    const auto end = portfolio_at(pr, sel, sc, 1, 50, est);
    CHECK(std::isfinite(end.total));
    CHECK(end.total > 0.0);
    CHECK_THROWS_AS(pi_example3(pr, sel, sc, 1, 10, ConditionalEstimator{ConditionalEstimator::Method::analytic_density}),
                    std::invalid_argument);

    auto flat = pr;
    flat.market.varsigma = 0.0;
    const auto sc0 = scenarios(flat, 32, 50);
    const auto sel0 = solve(flat, w, sc0);
    CHECK(portfolio_at(flat, sel0, sc0, 1, 10, est).hedge_H == 0.0);

    auto fast = pr;
    fast.market.varsigma = -0.01;
    fast.market.kappa = 50.0;
    const auto sc1 = scenarios(fast, 32, 50);
    const auto sel1 = solve(fast, w, sc1);
    const auto h = portfolio_at(fast, sel1, sc1, 1, 10, est);
    CHECK(std::abs(h.hedge_H) < 2.0 * h.stderr);

    auto still = pr;
    still.family.lambda = 0.0;
    const auto sel2 = solve(still, w, sc);
    CHECK(portfolio_at(still, sel2, sc, 1, 10, est).indec == 0.0);
}

TEST_CASE("example 3 replication tracks the bequest") {
    const auto pr = default_problem(Example::ex3);
    const auto sc = simulate_scenarios(TimeGrid(1.0, 50), pr.market, 3, 2000, 1, 0, 4);
    const auto sel = solve(pr, tilt_weight(0.5, pr.i1_max, pr.i1_cells, 2.2), sc);
    ConditionalEstimator est;
    est.inner_samples = 6;
    const std::size_t n = 16;
    const auto pf = portfolio_paths(pr, sel, sc, n, est);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = replicate(pr, sel, pf, sc, i);
        CHECK(r.target > 0.0);
        err += std::abs(r.x_terminal - r.target) / (n * pr.x0);
    }
    CHECK(err < 0.02);
}
