#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "incpref/index_set.hpp"

using namespace incpref;

namespace {

BrownianPath hand_path(std::vector<double> w) {
    BrownianPath p;
    p.grid = TimeGrid(1.0, w.size() - 1);
    p.w = w;
    p.wmax.resize(w.size());
    double m = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) p.wmax[l] = m = std::max(m, w[l]);
    return p;
}

MarketParams ou_market() {
    MarketParams m;
    m.kappa = 0.1;
    m.varsigma = -0.8;
    m.vol_model = VolModel::exp_ou;
    return m;
}

IndexSetConfig static_config() {
    IndexSetConfig cfg;
    cfg.d = 1;
    cfg.range = Box::interval(-10, 10);
    cfg.components[0] = {1, Box::interval(0.5, 0.5), {constant_selector({0.2}), constant_selector({-0.1})}, {constant_selector({0.0})}};
    cfg.components[1] = {2, Box::interval(0, 3), {constant_selector({0.0})}, {constant_selector({0.0})}};
    cfg.components[2] = {3, Box::interval(1, 2), {constant_selector({0.0})}, {constant_selector({0.0})}};
    return cfg;
}

}  // namespace

TEST_CASE("degenerate component stays at its initial set") {
    ComponentConfig c{3, Box::interval(0.25, 1.5), {constant_selector({0.0})}, {constant_selector({0.0})}};
    const auto p = sample_path(TimeGrid(1.0, 16), {1, 0});
    for (const Box& b : euler_component(c, p, 16)) CHECK(b == c.i0);
    CHECK_THROWS_AS(euler_component(c, p, 8), std::invalid_argument);
}

TEST_CASE("example 2 component on a hand path") {
    const double lambda = 0.2;
    const auto p = hand_path({0.0, 0.3, -0.2, 0.5, 0.1});
    const auto seq = euler_component(example2_index_config(lambda).components[2], p, 4);
    const double expect_hi[] = {1.0, 1.06, 1.0, 1.1, 1.02};
    const double expect_lo[] = {0.0, 0.0, -0.04, 0.0, 0.0};
    for (std::size_t l = 0; l < 5; ++l) {
        CHECK(seq[l].hi(0) == doctest::Approx(expect_hi[l]).epsilon(1e-14));
        CHECK(seq[l].lo(0) == doctest::Approx(expect_lo[l]).epsilon(1e-14));
    }
    const auto set = assemble(example2_index_config(lambda), p, 4);
    const double running[] = {1.0, 1.06, 1.06, 1.1, 1.1};
    for (std::size_t l = 0; l < 5; ++l) {
        CHECK(set.sets[l].lo(0) == 0.0);
        CHECK(set.sets[l].hi(0) == doctest::Approx(running[l]).epsilon(1e-14));
    }
}

TEST_CASE("constant drift boxes accumulate exactly") {
    const auto cfg = static_config();
    const auto p = sample_path(TimeGrid(2.0, 10), {2, 0});
    const auto set = assemble(cfg, p, 10);
    // I1 drifts with the box [-0.1, 0.2] per unit time
    for (std::size_t l = 0; l <= 10; ++l) {
        const double t = p.grid.time(l);
        CHECK(set.sets[l].lo(0) == doctest::Approx(0.5 - 0.1 * t + 0 + 1).epsilon(1e-13));
        CHECK(set.sets[l].hi(0) == doctest::Approx(0.5 + 0.2 * t + 3 + 2).epsilon(1e-13));
    }
    // without drift everything is R ∩ (I1 + I2 + I3)
    auto flat = cfg;
    flat.components[0].drift = {constant_selector({0.0})};
    for (const Box& b : assemble(flat, p, 10).sets) CHECK(b == Box::interval(1.5, 5.5));
    CHECK_FALSE(assemble(flat, p, 10).stop_index.has_value());
}

TEST_CASE("stopping rule freezes the component-2 intersection") {
    IndexSetConfig cfg;
    cfg.d = 1;
    cfg.range = Box::interval(-100, 100);
    cfg.components[0] = {1, Box::point({0.0}), {constant_selector({0.0})}, {constant_selector({0.0})}};
    // translating right at unit speed until the intersection is {1}, then jumping away
    Selector move = [](const PathState& s) { return std::vector<double>{s.t < 1.0 - 1e-9 ? 1.0 : 5.0}; };
    Selector zero = constant_selector({0.0});
    cfg.components[1] = {2, Box::interval(0, 1), {move}, {zero}};
    cfg.components[2] = {3, Box::point({0.0}), {zero}, {zero}};
    const auto p = sample_path(TimeGrid(2.0, 8), {4, 0});
    const auto set = assemble(cfg, p, 8);
    REQUIRE(set.stop_index.has_value());
    CHECK(*set.stop_index == 4);
    CHECK(set.sets[2] == Box::interval(0.5, 1));
    for (std::size_t l = 4; l <= 8; ++l) CHECK(set.sets[l] == Box::interval(1, 1));

    auto bad = cfg;
    bad.range = Box::interval(50, 60);
    CHECK_THROWS_WITH_AS(assemble(bad, p, 8), doctest::Contains("index 0"), std::runtime_error);
}

TEST_CASE("example 2 scheme equals the grid formula") {
    const double lambda = 0.2;
    const auto cfg = example2_index_config(lambda);
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto p = sample_path(TimeGrid(1.0, 64), {5, i});
        const auto approx = assemble(cfg, p, 64);
        const auto exact = exact_index_set(2, p, lambda);
        for (std::size_t l = 0; l <= 64; ++l) {
            CHECK(approx.sets[l].lo(0) == 0.0);
            CHECK(approx.sets[l].hi(0) == doctest::Approx(exact.sets[l].hi(0)).epsilon(1e-13));
            if (l > 0) CHECK(approx.sets[l].contains(approx.sets[l - 1]));
        }
    }
    const auto p = sample_path(TimeGrid(1.0, 8), {6, 0});
    CHECK(exact_index_set(2, p, lambda).sets[0] == Box::interval(0, 1));
    for (const Box& b : exact_index_set(2, p, 0.0).sets) CHECK(b == Box::interval(0, 1));
    CHECK_THROWS_AS(exact_index_set(4, p, lambda), std::invalid_argument);
}

TEST_CASE("example 3 scheme tracks the Euler volatility") {
    const double lambda = 0.2;
    const MarketParams m = ou_market();
    const auto cfg = example3_index_config(lambda, m);
    const auto p = sample_path(TimeGrid(1.0, 128), {7, 0});
    const auto set = assemble(cfg, p, 128);
    const auto i1 = euler_component(cfg.components[0], p, 128);
    double sig_hat = m.sigma0;
    for (std::size_t l = 0; l <= 128; ++l) {
        CHECK(i1[l].is_singleton());
        CHECK(i1[l].lo(1) == doctest::Approx(sig_hat).epsilon(1e-12));
        CHECK(set.sets[l].lo(1) == doctest::Approx(sig_hat + 1).epsilon(1e-12));
        CHECK(set.sets[l].width(1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(set.sets[l].hi(0) == doctest::Approx(lambda * p.wmax[l] + 1).epsilon(1e-12));
        if (l < 128) {
            const double dw = p.w[l + 1] - p.w[l];
            sig_hat += sig_hat * (0.5 * m.varsigma * m.varsigma - m.kappa * std::log(sig_hat)) * p.grid.dt() +
                       m.varsigma * sig_hat * dw;
        }
    }
    const auto vol = exp_ou_vol(sample_path(TimeGrid(1.0, 8), {6, 0}), m);
    const auto ex = exact_index_set(3, sample_path(TimeGrid(1.0, 8), {6, 0}), lambda, vol);
    CHECK(ex.sets[0] == Box({0, m.sigma0 + 1}, {1, m.sigma0 + 2}));
}

TEST_CASE("Euler volatility converges to the exact OU path") {
    const MarketParams m = ou_market();
    const auto cfg = example3_index_config(0.2, m);
    double err_coarse = 0, err_fine = 0;
    for (std::uint64_t i = 0; i < 30; ++i) {
        const auto fine = sample_path(TimeGrid(1.0, 4096), {8, i});
        const double exact = exp_ou_vol(fine, m).back();
        err_fine += std::abs(euler_component(cfg.components[0], fine, 4096).back().lo(1) - exact);
        const auto c = restrict_path(fine, 64);
        err_coarse += std::abs(euler_component(cfg.components[0], c, 64).back().lo(1) - exact);
    }
    CHECK(err_fine / 30 < 0.01);
    CHECK(err_fine < 0.5 * err_coarse);
}

TEST_CASE("adaptedness: future path changes leave the past untouched") {
    const MarketParams m = ou_market();
    const auto cfg = example3_index_config(0.2, m);
    auto p = sample_path(TimeGrid(1.0, 32), {9, 0});
    const auto before = assemble(cfg, p, 32);
    for (std::size_t l = 21; l <= 32; ++l) p.w[l] += 0.7;
    for (std::size_t l = 21; l <= 32; ++l) p.wmax[l] = std::max(p.wmax[l - 1], p.w[l]);
    const auto after = assemble(cfg, p, 32);
    for (std::size_t l = 0; l <= 20; ++l) CHECK(after.sets[l] == before.sets[l]);
    CHECK_FALSE(after.sets[32] == before.sets[32]);
}

TEST_CASE("Castaing family closure") {
    const double lambda = 0.2;
    const auto p = sample_path(TimeGrid(1.0, 50), {10, 0});
    const auto set = assemble(example2_index_config(lambda), p, 50);
    CastaingFamily fam;
    for (double q : {0.0, 0.25, 0.5, 1.0}) {
        std::vector<std::vector<double>> sel;
        for (std::size_t l = 0; l <= 50; ++l) sel.push_back({q * (lambda * p.wmax[l] + 1)});
        fam.selectors.push_back(sel);
    }
    CHECK(closure_gap(fam, set) < 1e-9);
    fam.selectors.pop_back();
    CHECK(closure_gap(fam, set) > 0.4);

    const MarketParams m = ou_market();
    const auto set3 = assemble(example3_index_config(lambda, m), p, 50);
    CastaingFamily fam3;
    for (int corner = 0; corner < 4; ++corner) {
        std::vector<std::vector<double>> sel;
        for (std::size_t l = 0; l <= 50; ++l) {
            const Box& b = set3.sets[l];
            sel.push_back({corner & 1 ? b.hi(0) : 0.0, b.lo(1) + (corner & 2 ? 1.0 : 0.0)});
        }
        fam3.selectors.push_back(sel);
    }
    CHECK(closure_gap(fam3, set3) < 1e-9);
}

TEST_CASE("convergence study") {
    ConvergenceSetup s;
    s.example = 2;
    s.K_list = {8, 16, 32};
    s.K_ref = 256;
    s.n_paths = 40;
    s.seed = 3;
    const auto rows = convergence_study(example2_index_config(0.2), s);
    REQUIRE(rows.size() == 3);
    for (std::size_t k = 1; k < rows.size(); ++k)
        CHECK(rows[k].mean_dh <= rows[k - 1].mean_dh + 2.0 * std::hypot(rows[k].stderr, rows[k - 1].stderr));
    CHECK(rows[0].n_paths == 40);
    s.K_list = {24};
    CHECK_THROWS_AS(convergence_study(example2_index_config(0.2), s), std::invalid_argument);

    // a deterministic configuration has nothing to converge
    IndexSetConfig det = example2_index_config(0.0);
    s.K_list = {8, 16};
    s.lambda = 0.0;
    for (const auto& r : convergence_study(det, s)) CHECK(r.mean_dh == 0.0);
}
