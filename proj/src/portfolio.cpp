#include "incpref/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "incpref/numerics.hpp"
#include "incpref/rng.hpp"

namespace incpref {

namespace {

double erfc_factor(double wmax_t, double w_t, double lag, double lambda) {
    if (lag > 0.0) return malliavin_running_max(wmax_t, w_t, lag, lambda);
    return wmax_t == w_t ? lambda : 0.0;
}

void check_node(const ScenarioSet& sc, std::size_t path, std::size_t t_idx) {
    if (path >= sc.n_paths) throw std::out_of_range("portfolio: path index out of range");
    if (t_idx > sc.grid.steps) throw std::out_of_range("portfolio: time index out of range");
}

double expm1_over(double rho, double T) { return rho == 0.0 ? T : std::expm1(rho * T) / rho; }

struct Outer {
    double t, w, wmax, sigma, xi, q_past;
};

Outer outer_state(const Policy& pol, const ScenarioSet& sc, std::size_t path, std::size_t l) {
    const auto w = sc.w_row(path), wmax = sc.wmax_row(path), sigma = sc.sigma_row(path), xi = sc.xi_row(path);
    double q = 0.0;
    if (pol.problem().example == Example::ex3) {
        double last = std::numeric_limits<double>::quiet_NaN();
        double rate = 0.0;
        for (std::size_t m = 0; m < l; ++m) {
            if (!(wmax[m] == last)) {
                rate = pol.coefs(wmax[m]).rate;
                last = wmax[m];
            }
            q += sc.grid.dt() * rate;
        }
    }
    return {sc.grid.time(l), w[l], wmax[l], sigma[l], xi[l], q};
}

// Conditional expectations by fresh inner paths started from the outer state.
PortfolioValue nested(const Problem& pr, const Policy& pol, const ScenarioSet& sc, std::size_t path, std::size_t l,
                      const ConditionalEstimator& est) {
    if (est.inner_samples < 1) throw std::invalid_argument("portfolio: inner samples must be >= 1");
    if (est.inner_samples >= (1u << 24)) throw std::invalid_argument("portfolio: too many inner samples");
    const auto& mk = pr.market;
    const auto& f = pr.family;
    const std::size_t K = sc.grid.steps;
    const double dt = sc.grid.dt(), sq = std::sqrt(dt);
    const Outer o = outer_state(pol, sc, path, l);
    const bool ex3 = pr.example == Example::ex3;
    const bool stoch_vol = mk.vol_model == VolModel::exp_ou && mk.varsigma != 0.0;
    const OuStep ou = ou_step(mk.kappa, dt);
    const double theta_t = mk.theta(o.sigma);
    const std::uint64_t stream = (sc.first_index + path) * (K + 1) + l;

    std::vector<double> efac(K - l), decay(K - l);
    for (std::size_t m = l; m < K; ++m) {
        const double lag = sc.grid.time(m) - o.t;
        efac[m - l] = erfc_factor(o.wmax, o.w, lag, f.lambda);
        decay[m - l] = std::exp(-mk.kappa * lag);
    }

    Stats s_theta, s_H, s_rm, s_total;
    for (std::size_t j = 0; j < est.inner_samples; ++j) {
        const auto sub = static_cast<std::uint32_t>(j);
        NormalStream z(est.seed, stream, StreamTag::nested_increments, sub);
        NormalStream aux(est.seed, stream, StreamTag::nested_aux, sub);
        double W = o.w, M = o.wmax, logsig = std::log(o.sigma), lr = 0.0, H = 0.0, Q = o.q_past, dQ = 0.0;
        double a_theta = 0.0, a_H = 0.0, a_rm = 0.0;
        double lastM = std::numeric_limits<double>::quiet_NaN();
        Policy::Coefs k;
        for (std::size_t m = l; m < K; ++m) {
            const double s = sc.grid.time(m);
            const double rho = std::exp(lr);
            const double xi_s = o.xi * rho;
            if (!(M == lastM)) {
                k = pol.coefs(M);
                lastM = M;
            }
            const auto c = pol.consumption(s, xi_s, k);
            const double C = c.total();
            const double R = pol.risk_tolerance(xi_s, c);
            a_theta += dt * rho * R;
            a_H -= dt * rho * (C - R) * H;
            const double e = efac[m - l];
            if (e != 0.0) a_rm += dt * rho * pol.dC_dY(k, c) * e;
            if (ex3) {
                Q += dt * k.rate;
                if (e != 0.0) dQ += dt * k.drate * e;
            }
            const double sig = stoch_vol ? std::exp(logsig) : o.sigma;
            const double th = mk.theta(sig);
            const double dW = sq * z.next();
            if (stoch_vol) {
                H -= mk.varsigma * th * decay[m - l] * (dW + th * dt);
                double jn = ou.a * dW;
                if (ou.b > 0.0) jn += ou.b * aux.next();
                logsig = ou.decay * logsig + mk.varsigma * jn;
            }
            lr += -(mk.r + 0.5 * th * th) * dt - th * dW;
            W += dW;
            M = std::max(M, W);
        }
        if (ex3) {
            const double rho = std::exp(lr);
            const double XT = pol.terminal(o.xi * rho, Q);
            const double RT = XT / f.p_circ;
            a_theta += rho * RT;
            a_H -= rho * (XT - RT) * H;
            if (Q > 0.0) a_rm += rho * XT / (f.p_circ * Q) * dQ;
        }
        const double v_theta = theta_t * a_theta / o.sigma, v_H = a_H / o.sigma, v_rm = a_rm / o.sigma;
        s_theta.add(v_theta);
        s_H.add(v_H);
        s_rm.add(v_rm);
        s_total.add(v_theta + v_H + v_rm);
    }
    PortfolioValue v;
    v.theta = s_theta.mean();
    v.hedge_H = s_H.mean();
    v.indec_running_max = s_rm.mean();
    // boundary motion of [sigma + 1, sigma + 2] only matters through a w2 density at the ends; atoms carry none
    v.indec_volatility = 0.0;
    v.indec = v.indec_running_max + v.indec_volatility;
    v.hedge_P = 0.0;
    v.total = v.theta + v.hedge_H + v.hedge_P + v.indec;
    v.stderr = s_total.stderr();
    return v;
}

// Example 2 by quadrature against the conditional law of (running max, W) over [t, s].
PortfolioValue analytic_example2(const Problem& pr, const Policy& pol, const ScenarioSet& sc, std::size_t path,
                                 std::size_t l) {
    using boost::math::quadrature::gauss_kronrod;
    const auto& mk = pr.market;
    const auto& f = pr.family;
    const std::size_t K = sc.grid.steps;
    const double dt = sc.grid.dt();
    const Outer o = outer_state(pol, sc, path, l);
    const double theta = mk.theta(o.sigma);
    double a_theta = 0.0, a_rm = 0.0;
    // the path maximum is only observed on the grid
    const double shift = kMonitoringShift * std::sqrt(dt);
    auto integrand = [&](double s, double mprime, double xprime, bool want_theta) {
        const double M = std::max(o.wmax, o.w + std::max(mprime - shift, xprime));
        const double rho = std::exp(-(mk.r + 0.5 * theta * theta) * (s - o.t) - theta * xprime);
        const auto c = pol.consumption(s, o.xi * rho, M);
        if (want_theta) return rho * pol.risk_tolerance(o.xi * rho, c);
        return rho * pol.dC_dY(M, c);
    };
    for (std::size_t m = l; m < K; ++m) {
        const double s = sc.grid.time(m);
        const double tau = s - o.t;
        const double e = erfc_factor(o.wmax, o.w, tau, f.lambda);
        if (tau == 0.0) {
            a_theta += dt * integrand(s, 0.0, 0.0, true);
            a_rm += dt * e * integrand(s, 0.0, 0.0, false);
            continue;
        }
        const double span = 14.0 * std::sqrt(tau);
        for (int which = 0; which < 2; ++which) {
            if (which == 1 && e == 0.0) continue;
            auto inner = [&](double mprime) {
                auto g = [&](double u) {
                    const double xprime = 2.0 * mprime - u;
                    return joint_density_max_bm(mprime, xprime, tau) * integrand(s, mprime, xprime, which == 0);
                };
                if (shift < span)
                    return gauss_kronrod<double, 31>::integrate(g, mprime, mprime + shift, 4, 1e-10) +
                           gauss_kronrod<double, 31>::integrate(g, mprime + shift, mprime + span, 4, 1e-10);
                return gauss_kronrod<double, 31>::integrate(g, mprime, mprime + span, 4, 1e-10);
            };
            const double kink = o.wmax - o.w + shift;
            double total = 0.0;
            if (kink > 0.0 && kink < span) {
                total = gauss_kronrod<double, 31>::integrate(inner, 0.0, kink, 4, 1e-10) +
                        gauss_kronrod<double, 31>::integrate(inner, kink, span, 4, 1e-10);
            } else {
                total = gauss_kronrod<double, 31>::integrate(inner, 0.0, span, 4, 1e-10);
            }
            if (which == 0) a_theta += dt * total;
            else a_rm += dt * e * total;
        }
    }
    PortfolioValue v;
    v.theta = theta * a_theta / o.sigma;
    v.indec_running_max = a_rm / o.sigma;
    v.indec = v.indec_running_max;
    v.total = v.theta + v.indec;
    return v;
}

bool same_weight(const Weight& a, const Weight& b) {
    if (a.index() != b.index()) return false;
    if (const auto* fa = std::get_if<FiniteWeight>(&a)) return fa->w == std::get<FiniteWeight>(b).w;
    const auto& ga = std::get<GridAtomWeight>(a);
    const auto& gb = std::get<GridAtomWeight>(b);
    if (ga.i1_max != gb.i1_max || ga.w1 != gb.w1 || ga.w2.size() != gb.w2.size()) return false;
    for (std::size_t k = 0; k < ga.w2.size(); ++k)
        if (ga.w2[k].location != gb.w2[k].location || ga.w2[k].mass != gb.w2[k].mass) return false;
    return true;
}

}  // namespace

double malliavin_running_max(double wmax_t, double w_t, double dt, double lambda) {
    if (!(dt > 0.0)) throw std::invalid_argument("malliavin_running_max: dt must be positive");
    if (wmax_t < w_t) throw std::invalid_argument("malliavin_running_max: running maximum below the path");
    return lambda * std::erfc((wmax_t - w_t) / std::sqrt(2.0 * dt));
}

double h_xi_exp_ou(std::span<const double> w, std::span<const double> vol, std::size_t t_idx, std::size_t s_idx,
                   const MarketParams& params, double dt) {
    if (t_idx > s_idx) throw std::invalid_argument("h_xi_exp_ou: t index after s index");
    if (s_idx >= w.size() || vol.size() != w.size()) throw std::out_of_range("h_xi_exp_ou: index out of range");
    if (params.vol_model == VolModel::constant || params.varsigma == 0.0) return 0.0;
    double h = 0.0;
    for (std::size_t v = t_idx; v < s_idx; ++v) {
        const double th = params.theta(vol[v]);
        h += th * std::exp(-params.kappa * static_cast<double>(v - t_idx) * dt) * (w[v + 1] - w[v] + th * dt);
    }
    return -params.varsigma * h;
}

PortfolioValue pi_example1(const Problem& pr, const PolicySelector& sel, const ScenarioSet& sc, std::size_t path,
                           std::size_t t_idx, const ConditionalEstimator& est) {
    pr.validate();
    check_node(sc, path, t_idx);
    const auto& mk = pr.market;
    const double p = pr.family.p, T = pr.horizon, t = sc.grid.time(t_idx);
    PortfolioValue v;
    switch (pr.example) {
        case Example::ex1_case1:
        case Example::ex1_case2: {
            const double theta = pr.theta();
            const double xi = sc.xi_row(path)[t_idx];
            const double rho = p == 1.0 ? 0.0 : rho_p(mk.r, theta, p);
            v.theta = pr.x0 * theta * expm1_over(rho, T - t) / (p * mk.sigma0 * std::pow(xi, 1.0 / p) * expm1_over(rho, T));
            v.total = v.theta;
            return v;
        }
        case Example::ex1_case3: {
            const Policy pol(pr, sel);
            v = nested(pr, pol, sc, path, t_idx, est);
            // constant coefficients and a fixed index set: only the mean-variance part survives
            v.hedge_H = 0.0;
            v.indec = v.indec_running_max = v.indec_volatility = 0.0;
            v.total = v.theta;
            return v;
        }
        default: throw std::invalid_argument("pi_example1: problem is not an example 1 case");
    }
}

PortfolioValue pi_example2(const Problem& pr, const PolicySelector& sel, const ScenarioSet& sc, std::size_t path,
                           std::size_t t_idx, const ConditionalEstimator& est) {
    pr.validate();
    if (pr.example != Example::ex2) throw std::invalid_argument("pi_example2: problem is not example 2");
    check_node(sc, path, t_idx);
    const Policy pol(pr, sel);
    if (est.method == ConditionalEstimator::Method::analytic_density) return analytic_example2(pr, pol, sc, path, t_idx);
    auto v = nested(pr, pol, sc, path, t_idx, est);
    v.hedge_H = 0.0;
    v.total = v.theta + v.indec;
    return v;
}

PortfolioValue pi_example3(const Problem& pr, const PolicySelector& sel, const ScenarioSet& sc, std::size_t path,
                           std::size_t t_idx, const ConditionalEstimator& est) {
    pr.validate();
    if (pr.example != Example::ex3) throw std::invalid_argument("pi_example3: problem is not example 3");
    if (est.method != ConditionalEstimator::Method::nested_mc)
        throw std::invalid_argument("pi_example3: only nested Monte Carlo is available");
    check_node(sc, path, t_idx);
    const Policy pol(pr, sel);
    return nested(pr, pol, sc, path, t_idx, est);
}

PortfolioValue portfolio_at(const Problem& pr, const PolicySelector& sel, const ScenarioSet& sc, std::size_t path,
                            std::size_t t_idx, const ConditionalEstimator& est) {
    switch (pr.example) {
        case Example::ex1_case1:
        case Example::ex1_case2:
        case Example::ex1_case3: return pi_example1(pr, sel, sc, path, t_idx, est);
        case Example::ex2: return pi_example2(pr, sel, sc, path, t_idx, est);
        case Example::ex3: return pi_example3(pr, sel, sc, path, t_idx, est);
    }
    throw std::invalid_argument("portfolio_at: unknown example");
}

PortfolioSelector portfolio_paths(const Problem& pr, const PolicySelector& sel, const ScenarioSet& sc,
                                  std::size_t n_paths, const ConditionalEstimator& est, int threads) {
    n_paths = std::min(n_paths, sc.n_paths);
    PortfolioSelector out;
    out.weight = sel.weight;
    out.n_paths = n_paths;
    out.stride = sc.stride();
    const std::size_t total = n_paths * out.stride;
    for (auto* v : {&out.pi, &out.theta, &out.hedge_H, &out.hedge_P, &out.indec}) v->assign(total, 0.0);
    parallel_blocks(total, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const std::size_t i = idx / out.stride, l = idx % out.stride;
            if (l == sc.grid.steps && !pr.has_bequest()) continue;  // all positions liquidated at T
            const auto v = portfolio_at(pr, sel, sc, i, l, est);
            out.pi[idx] = v.total;
            out.theta[idx] = v.theta;
            out.hedge_H[idx] = v.hedge_H;
            out.hedge_P[idx] = v.hedge_P;
            out.indec[idx] = v.indec;
        }
    });
    return out;
}

WealthPath simulate_wealth(double x0, const MarketParams& mk, double dt, std::span<const double> w,
                           std::span<const double> sigma, std::span<const double> C, std::span<const double> pi) {
    const std::size_t K = C.size();
    if (pi.size() != K || w.size() < K + 1 || sigma.size() < K) throw std::invalid_argument("simulate_wealth: size mismatch");
    const double growth = std::exp(mk.r * dt);
    WealthPath out;
    double X = x0;
    out.min_wealth = X;
    for (std::size_t m = 0; m < K; ++m) {
        X = X * growth + (pi[m] * (mk.mu - mk.r) - C[m]) * dt + pi[m] * sigma[m] * (w[m + 1] - w[m]);
        out.min_wealth = std::min(out.min_wealth, X);
    }
    out.x_terminal = X;
    return out;
}

Replication replicate(const Problem& pr, const PolicySelector& sel, const PortfolioSelector& pf, const ScenarioSet& sc,
                      std::size_t path) {
    if (path >= pf.n_paths || path >= sc.n_paths) throw std::out_of_range("replicate: path index out of range");
    if (pf.stride != sc.stride()) throw std::invalid_argument("replicate: portfolio and scenarios differ in grid");
    if (!same_weight(sel.weight, pf.weight)) throw std::invalid_argument("replicate: portfolio was built for another weight");
    const Policy pol(pr, sel);
    const std::size_t K = sc.grid.steps;
    const double dt = sc.grid.dt();
    const auto wmax = sc.wmax_row(path), xi = sc.xi_row(path);
    std::vector<double> C(K);
    double Q = 0.0;
    for (std::size_t m = 0; m < K; ++m) {
        const auto k = pol.coefs(wmax[m]);
        C[m] = pol.consumption(sc.grid.time(m), xi[m], k).total();
        Q += dt * k.rate;
    }
    const std::span<const double> pi(pf.pi.data() + path * pf.stride, K);
    const auto wp = simulate_wealth(pr.x0, pr.market, dt, sc.w_row(path), sc.sigma_row(path), C, pi);
    return {wp.x_terminal, wp.min_wealth, pol.terminal(xi[K], Q)};
}

}  // namespace incpref
