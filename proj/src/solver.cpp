#include "incpref/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "incpref/numerics.hpp"

namespace incpref {

namespace {

constexpr double kNormTol = 1e-9;
constexpr double kQuotientTol = 1e-12;

bool is_example1(Example e) {
    return e == Example::ex1_case1 || e == Example::ex1_case2 || e == Example::ex1_case3;
}

FamilyKind expected_family(Example e) {
    switch (e) {
        case Example::ex1_case1: return FamilyKind::case1_independent;
        case Example::ex1_case2: return FamilyKind::case2_attention;
        case Example::ex1_case3: return FamilyKind::case3_substitution;
        case Example::ex2: return FamilyKind::ex2_socialization;
        case Example::ex3: return FamilyKind::ex3_hybrid;
    }
    return FamilyKind::case1_independent;
}

bool log_branch(const Problem& pr) {
    return pr.family.p == 1.0 && (pr.example == Example::ex1_case1 || pr.example == Example::ex1_case2);
}

void require_normalized(const Weight& w, const char* who) {
    const double n = norm1(w);
    if (std::abs(n - 1.0) > kNormTol)
        throw std::invalid_argument(std::string(who) + ": weight is not normalized (norm " + std::to_string(n) + ")");
}

const FiniteWeight& finite_weight(const Weight& w) {
    const auto* f = std::get_if<FiniteWeight>(&w);
    if (!f || f->w.size() != 2) throw std::invalid_argument("weight: expected a two-point finite weight");
    return *f;
}

double pos_pow(double x, double e) { return x > 0.0 ? std::pow(x, e) : 0.0; }

double expm1_over(double rho, double T) { return rho == 0.0 ? T : std::expm1(rho * T) / rho; }

// log(1 + e^lu) without overflow
double log1p_exp(double lu) { return lu > 35.0 ? lu + std::exp(-lu) : std::log1p(std::exp(lu)); }

// Exact log-space solve of 1 + A x^{1-p}/(p-1) = y x^p, returned as z = log x.
double log_psi_exact(double s, double A, double p) {
    if (A == 0.0) return -s / p;
    const double la = std::log(A / (p - 1.0));
    double zl = std::max(-s / p, (la - s) / (2.0 * p - 1.0));
    double zh = zl + std::log(2.0) / p;
    auto g = [&](double z) { return log1p_exp(la + (1.0 - p) * z) - s - p * z; };
    double z = 0.5 * (zl + zh);
    for (int it = 0; it < 200; ++it) {
        const double gz = g(z);
        if (gz == 0.0) return z;
        if (gz > 0.0) zl = z; else zh = z;
        const double frac = 1.0 / (1.0 + std::exp(-(la + (1.0 - p) * z)));
        const double d = -p - (p - 1.0) * frac;
        double zn = z - gz / d;
        if (!(zn > zl && zn < zh)) zn = 0.5 * (zl + zh);
        if (std::abs(zn - z) <= 1e-15 * std::max(1.0, std::abs(z))) return zn;
        z = zn;
    }
    return z;
}

double dlog_psi_exact(double z, double A, double p) {
    if (A == 0.0) return -1.0 / p;
    const double lu = std::log(A / (p - 1.0)) + (1.0 - p) * z;
    const double frac = 1.0 / (1.0 + std::exp(-lu));
    return -1.0 / (p + (p - 1.0) * frac);
}

struct PassResult {
    std::vector<double> consumption, terminal;  // per path
    double qmin = std::numeric_limits<double>::infinity();
    double qmax = -std::numeric_limits<double>::infinity();
    std::size_t qviol = 0;
    std::size_t sigma_viol = 0;
    std::size_t nodes = 0;

    // per-path budget a * consumption + b * terminal
    Stats budget(double a = 1.0, double b = 1.0) const {
        Stats s;
        for (std::size_t i = 0; i < consumption.size(); ++i) s.add(a * consumption[i] + b * terminal[i]);
        return s;
    }
    Stats consumption_stats() const { return budget(1.0, 0.0); }
    Stats terminal_stats() const { return budget(0.0, 1.0); }
};

struct QuotientBounds {
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    bool check = false;
};

QuotientBounds quotient_bounds(const Problem& pr, double p, double wmax) {
    const auto& f = pr.family;
    switch (pr.example) {
        case Example::ex1_case2: return {0.0, std::pow(f.chi, 1.0 / p), true};
        case Example::ex2: return {std::pow(f.chi_fn(0.0), 1.0 / p), std::pow(f.chi_fn(f.lambda * wmax + 1.0), 1.0 / p), true};
        case Example::ex3: {
            const double y = std::min(f.lambda * wmax + 1.0, pr.i1_max);
            return {std::pow(f.chi_fn(0.0), 1.0 / p), std::pow(f.chi_fn(y), 1.0 / p), true};
        }
        default: return {};
    }
}

// Runs the policy over every path; stores materialized values for the first store->stored_paths paths.
PassResult run_pass(const Problem& pr, const Policy& pol, const ScenarioSet& sc, int threads, PolicySelector* store) {
    const std::size_t K = sc.grid.steps, stride = sc.stride(), n = sc.n_paths;
    const double dt = sc.grid.dt();
    const bool ex3 = pr.example == Example::ex3;
    std::size_t n_store = 0;
    if (store) {
        n_store = std::min(store->stored_paths, n);
        store->stored_paths = n_store;
        store->c1.assign(n_store * stride, 0.0);
        store->c2.assign(n_store * stride, 0.0);
        store->C.assign(n_store * stride, 0.0);
        store->x_terminal.assign(n_store, 0.0);
    }
    PassResult out;
    out.consumption.assign(n, 0.0);
    out.terminal.assign(n, 0.0);
    const std::size_t nb = block_count(n);
    std::vector<PassResult> parts(nb);
    parallel_blocks(n, threads, [&](std::size_t begin, std::size_t end, std::size_t block) {
        PassResult& r = parts[block];
        for (std::size_t i = begin; i < end; ++i) {
            const auto xi = sc.xi_row(i), wmax = sc.wmax_row(i), sigma = sc.sigma_row(i);
            double cons = 0.0, Q = 0.0;
            double last_wmax = std::numeric_limits<double>::quiet_NaN();
            Policy::Coefs k;
            QuotientBounds qb;
            for (std::size_t m = 0; m <= K; ++m) {
                if (!(wmax[m] == last_wmax)) {
                    k = pol.coefs(wmax[m]);
                    qb = quotient_bounds(pr, pol.power(), wmax[m]);
                    last_wmax = wmax[m];
                }
                const auto node = pol.consumption(sc.grid.time(m), xi[m], k);
                if (i < n_store) {
                    store->c1[i * stride + m] = node.c1;
                    store->c2[i * stride + m] = node.c2;
                    store->C[i * stride + m] = node.total();
                }
                if (m == K) break;
                cons += dt * xi[m] * node.total();
                if (ex3) {
                    Q += dt * k.rate;
                    if (sigma[m] < pr.epsilon || sigma[m] > pr.epsilon + 1.0) ++r.sigma_viol;
                }
                ++r.nodes;
                if (node.c2 > 0.0) {
                    const double q = node.c1 / node.c2;
                    r.qmin = std::min(r.qmin, q);
                    r.qmax = std::max(r.qmax, q);
                    if (qb.check && (q < qb.lo * (1.0 - kQuotientTol) || q > qb.hi * (1.0 + kQuotientTol))) ++r.qviol;
                }
            }
            const double XT = pol.terminal(xi[K], Q);
            if (i < n_store) store->x_terminal[i] = XT;
            out.consumption[i] = cons;
            out.terminal[i] = xi[K] * XT;
        }
    });
    for (const auto& r : parts) {
        out.qmin = std::min(out.qmin, r.qmin);
        out.qmax = std::max(out.qmax, r.qmax);
        out.qviol += r.qviol;
        out.sigma_viol += r.sigma_viol;
        out.nodes += r.nodes;
    }
    return out;
}

void fill_diagnostics(const Problem& pr, const PassResult& r, const Stats& budget, SelectorDiagnostics& d) {
    d.budget = budget.mean();
    d.budget_stderr = budget.stderr();
    d.budget_residual = (d.budget - pr.x0) / pr.x0;
    if (r.qmin <= r.qmax) {
        d.quotient_min = r.qmin;
        d.quotient_max = r.qmax;
    }
    d.quotient_violations = r.qviol;
    d.sigma_violation_fraction = r.nodes ? static_cast<double>(r.sigma_viol) / static_cast<double>(r.nodes) : 0.0;
}

// Evaluates the policy at the selector's eta and records diagnostics.
PolicySelector finish(const Problem& pr, PolicySelector sel, const ScenarioSet& sc, const SolveOptions& opt) {
    sel.stored_paths = opt.store_paths;
    const Policy pol(pr, sel);
    const auto r = run_pass(pr, pol, sc, opt.threads, &sel);
    fill_diagnostics(pr, r, r.budget(), sel.diag);
    return sel;
}

// Power-homogeneous feedbacks: c(eta) = eta^{-1/p} c(1) and X_T(eta) = eta^{-1/p_circ} X_T(1).
// One pass at eta = 1, then eta_of(pass) and a rescale of the stored values.
template <class EtaOf>
PolicySelector solve_homogeneous(const Problem& pr, PolicySelector sel, const ScenarioSet& sc, const SolveOptions& opt,
                                 EtaOf eta_of) {
    sel.eta = 1.0;
    sel.stored_paths = opt.store_paths;
    const Policy unit(pr, sel);
    const auto r = run_pass(pr, unit, sc, opt.threads, &sel);
    sel.eta = eta_of(r, unit, sel.diag);
    if (!(sel.eta > 0.0) || !std::isfinite(sel.eta)) throw NumericalError("solve: eta is not a positive finite number");
    const double a = std::pow(sel.eta, -1.0 / unit.power());
    const double b = pr.has_bequest() ? std::pow(sel.eta, -1.0 / pr.family.p_circ) : 0.0;
    for (auto* v : {&sel.c1, &sel.c2, &sel.C})
        for (double& x : *v) x *= a;
    for (double& x : sel.x_terminal) x *= b;
    fill_diagnostics(pr, r, r.budget(a, b), sel.diag);
    return sel;
}

void check_paths(const Problem& pr, const ScenarioSet& sc) {
    if (sc.n_paths == 0) throw std::invalid_argument("solve: empty scenario set");
    if (std::abs(sc.grid.horizon - pr.horizon) > 1e-12) throw std::invalid_argument("solve: scenario horizon differs from the problem horizon");
}

}  // namespace

std::string to_string(Example e) {
    switch (e) {
        case Example::ex1_case1: return "example1_case1";
        case Example::ex1_case2: return "example1_case2";
        case Example::ex1_case3: return "example1_case3";
        case Example::ex2: return "example2";
        case Example::ex3: return "example3";
    }
    return "?";
}

Example example_from_string(const std::string& s) {
    for (auto e : {Example::ex1_case1, Example::ex1_case2, Example::ex1_case3, Example::ex2, Example::ex3})
        if (to_string(e) == s) return e;
    throw std::invalid_argument("unknown example '" + s + "'");
}

Problem default_problem(Example e) {
    Problem pr;
    pr.example = e;
    pr.family.kind = expected_family(e);
    if (e == Example::ex2 || e == Example::ex3) {
        pr.family.beta = 0.05;
        pr.family.lambda = 0.2;
    }
    if (e == Example::ex3) {
        pr.market.kappa = 0.1;
        pr.market.varsigma = -0.8;
        pr.market.vol_model = VolModel::exp_ou;
    }
    return pr;
}

void Problem::validate() const {
    market.validate();
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("problem: horizon must be positive");
    if (!(x0 > 0.0) || !std::isfinite(x0)) throw std::invalid_argument("problem: x0 must be positive");
    if (family.kind != expected_family(example))
        throw std::invalid_argument("problem: utility family " + incpref::to_string(family.kind) + " does not match " +
                                    incpref::to_string(example));
    if (log_branch(*this)) {
        UtilityFamily f = family;
        f.p = 2.0;
        f.validate();
    } else {
        family.validate();
    }
    if (example == Example::ex3) {
        if (!(epsilon > 0.0)) throw std::invalid_argument("problem: epsilon must be positive");
        if (!(i1_max > 0.0) || i1_cells < 1) throw std::invalid_argument("problem: bad w1 grid");
    }
    if (is_example1(example) && market.vol_model != VolModel::constant)
        throw std::invalid_argument("problem: example 1 needs constant volatility");
    if (example == Example::ex2 && market.vol_model != VolModel::constant)
        throw std::invalid_argument("problem: example 2 needs constant volatility");
}

double rho_p(double r, double theta, double p) {
    if (!(p > 0.0)) throw std::invalid_argument("rho_p: p must be positive");
    if (p == 1.0) throw std::invalid_argument("rho_p: p = 1 uses the logarithmic branch");
    return (1.0 / p - 1.0) * r + (1.0 - p) * theta * theta / (2.0 * p * p);
}

double psi_case3(double y, double A, double p) {
    if (!(y > 0.0) || !std::isfinite(y)) throw std::invalid_argument("psi_case3: y must be positive");
    if (!(A >= 0.0)) throw std::invalid_argument("psi_case3: A must be nonnegative");
    if (!(p > 1.0)) throw std::invalid_argument("psi_case3: p must exceed 1");
    return std::exp(log_psi_exact(std::log(y), A, p));
}

double psi_case3_residual(double x, double y, double A, double p) {
    const double lhs = 1.0 + A * std::pow(x, 1.0 - p) / (p - 1.0);
    const double rhs = y * std::pow(x, p);
    return std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
}

PsiTable::PsiTable(double A, double p, double s_lo, double s_hi, double h) : A_(A), p_(p), s_lo_(s_lo), h_(h) {
    if (!(p > 1.0) || !(A >= 0.0)) throw std::invalid_argument("PsiTable: need p > 1 and A >= 0");
    if (!(s_hi > s_lo) || !(h > 0.0)) throw std::invalid_argument("PsiTable: bad range");
    const auto n = static_cast<std::size_t>(std::ceil((s_hi - s_lo) / h)) + 1;
    s_hi_ = s_lo + h * static_cast<double>(n - 1);
    z_.resize(n);
    dz_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        z_[k] = log_psi_exact(s_lo + h * static_cast<double>(k), A, p);
        dz_[k] = dlog_psi_exact(z_[k], A, p);
    }
}

double PsiTable::log_psi(double s) const {
    if (!(s >= s_lo_ && s < s_hi_)) return log_psi_exact(s, A_, p_);
    const double u = (s - s_lo_) / h_;
    const auto k = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(k), t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * z_[k] + (t3 - 2 * t2 + t) * h_ * dz_[k] + (-2 * t3 + 3 * t2) * z_[k + 1] +
           (t3 - t2) * h_ * dz_[k + 1];
}

double PsiTable::dlog_psi(double s) const {
    if (!(s >= s_lo_ && s < s_hi_)) return dlog_psi_exact(log_psi_exact(s, A_, p_), A_, p_);
    const double u = (s - s_lo_) / h_;
    const auto k = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(k), t2 = t * t;
    return ((6 * t2 - 6 * t) * z_[k] + (-6 * t2 + 6 * t) * z_[k + 1]) / h_ + (3 * t2 - 4 * t + 1) * dz_[k] +
           (3 * t2 - 2 * t) * dz_[k + 1];
}

std::vector<double> weight_support(const Problem& pr, double wmax) {
    const auto& f = pr.family;
    switch (pr.example) {
        case Example::ex1_case1: return {1.0, 2.0};
        case Example::ex1_case2: return {f.chi, 0.0};
        case Example::ex1_case3: return {f.kappa1, f.kappa2};
        case Example::ex2: return {0.0, f.lambda * wmax + 1.0};
        case Example::ex3: break;
    }
    throw std::invalid_argument("weight_support: example 3 weights are not finite");
}

// ---------------------------------------------------------------------------

Policy::Policy(const Problem& problem, const PolicySelector& selector)
    : problem_(problem), weight_(selector.weight), eta_(selector.eta) {
    if (!(eta_ > 0.0) || !std::isfinite(eta_)) throw std::invalid_argument("policy: eta must be positive");
    if (problem_.example == Example::ex3) {
        const auto& g = std::get<GridAtomWeight>(weight_);
        if (g.w2.size() != 1) throw std::invalid_argument("policy: example 3 supports a single w2 atom");
        p_bar_ = problem_.family.p_fn(g.w2[0].location);
        atom_mass_ = g.w2[0].mass;
    } else {
        const auto& w = finite_weight(weight_);
        w1_ = w.w[0];
        w2_ = w.w[1];
        if (problem_.example == Example::ex1_case3) {
            const double A = w1_ * problem_.family.kappa1 + w2_ * problem_.family.kappa2;
            psi_ = std::make_shared<PsiTable>(A, problem_.family.p);
        }
    }
}

double Policy::attention(double wmax) const {
    const auto& f = problem_.family;
    return w1_ * f.chi_fn(0.0) + w2_ * f.chi_fn(f.lambda * wmax + 1.0);
}

double Policy::A(double wmax) const {
    return grid().w1_chi_integral(problem_.family.lambda * wmax + 1.0, problem_.family.chi_fn);
}

double Policy::B(double wmax) const { return grid().w1_integral(problem_.family.lambda * wmax + 1.0); }

double Policy::power() const {
    if (problem_.example == Example::ex3) return p_bar_;
    return problem_.family.p;
}

Policy::Coefs Policy::coefs(double wmax) const {
    const auto& f = problem_.family;
    const double e = 1.0 / power();
    switch (problem_.example) {
        case Example::ex1_case1: return {pos_pow(w1_, e), pos_pow(w2_, e), w1_ + w2_};
        case Example::ex1_case2: return {pos_pow(w1_ * f.chi, e), pos_pow(w1_ + w2_, e), w1_ + w2_};
        case Example::ex1_case3: return {0.0, 0.0, w1_ + w2_};
        case Example::ex2: {
            const double a = attention(wmax);
            Coefs k{pos_pow(a, e), pos_pow(w1_ + w2_, e), w1_ + w2_};
            if (a > 0.0) k.dlog1 = e * w2_ * f.chi_fn.derivative(f.lambda * wmax + 1.0) / a;
            return k;
        }
        case Example::ex3: {
            const double Y = f.lambda * wmax + 1.0;
            const double A_ = A(wmax), B_ = B(wmax), w1 = grid().w1_at(Y);
            Coefs k{pos_pow(atom_mass_ * A_, e), pos_pow(atom_mass_ * B_, e), atom_mass_ * B_};
            if (A_ > 0.0) k.dlog1 = e * w1 * f.chi_fn(Y) / A_;
            if (B_ > 0.0) k.dlog2 = e * w1 / B_;
            k.drate = atom_mass_ * w1;
            return k;
        }
    }
    return {};
}

Policy::Node Policy::consumption(double t, double xi, const Coefs& k) const {
    const auto& f = problem_.family;
    const double p = power();
    if (problem_.example == Example::ex1_case3) {
        const double s = std::log(eta_ * xi);
        double z = psi_->log_psi(s);
        const double A = w1_ * f.kappa1 + w2_ * f.kappa2;
        if (A > 0.0) {
            const double lu = std::log(A / (p - 1.0)) + (1.0 - p) * z;
            const double g = log1p_exp(lu) - s - p * z;
            z -= g / (-p - (p - 1.0) / (1.0 + std::exp(-lu)));
        }
        const double x = std::exp(z);
        return {x, x};
    }
    const double base = std::exp(-(std::log(eta_ * xi) + f.beta * t) / p);
    return {k.root1 * base, k.root2 * base};
}

double Policy::risk_tolerance(double xi, const Node& c) const {
    if (problem_.example == Example::ex1_case3) return -c.total() * psi_->dlog_psi(std::log(eta_ * xi));
    return c.total() / power();
}

double Policy::terminal(double xi_T, double Q) const {
    if (problem_.example != Example::ex3) return 0.0;
    const auto& f = problem_.family;
    const double T = problem_.horizon;
    return pos_pow(Q / (eta_ * xi_T * T * std::exp(f.beta * T)), 1.0 / f.p_circ);
}

// ---------------------------------------------------------------------------

PolicySelector solve_example1(const Problem& pr, const FiniteWeight& w, const ScenarioSet& sc, const SolveOptions& opt) {
    pr.validate();
    if (!is_example1(pr.example)) throw std::invalid_argument("solve_example1: problem is not an example 1 case");
    require_normalized(w, "solve_example1");
    if (w.w.size() != 2) throw std::invalid_argument("solve_example1: expected two weights");
    check_paths(pr, sc);
    const auto& f = pr.family;
    const double p = f.p, T = pr.horizon, X0 = pr.x0;
    PolicySelector sel;
    sel.weight = w;

    if (pr.example != Example::ex1_case3) {
        const double a1 = pr.example == Example::ex1_case1 ? w.w[0] : w.w[0] * f.chi;
        const double a2 = pr.example == Example::ex1_case1 ? w.w[1] : w.w[0] + w.w[1];
        double eta = 0.0;
        if (p == 1.0) {
            eta = (a1 + a2) * T / X0;
        } else {
            const double rho = rho_p(pr.market.r, pr.theta(), p);
            const double root = (pos_pow(a1, 1.0 / p) + pos_pow(a2, 1.0 / p)) * expm1_over(rho, T) / X0;
            eta = std::pow(root, p);
        }
        return solve_homogeneous(pr, std::move(sel), sc, opt,
                                 [eta](const PassResult&, const Policy&, SelectorDiagnostics&) { return eta; });
    }

    // Case III: budget 2 E[sum dt xi psi(eta xi)] = X0, Newton on log eta inside a bracket
    const double A = w.w[0] * f.kappa1 + w.w[1] * f.kappa2;
    const PsiTable table(A, p);
    const std::size_t K = sc.grid.steps, n = sc.n_paths;
    const double dt = sc.grid.dt();
    std::vector<double> logxi(n * K);
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = sc.xi_row(i);
        for (std::size_t m = 0; m < K; ++m) logxi[i * K + m] = std::log(xi[m]);
    }
    struct Eval {
        double value, slope, stderr;
    };
    int evals = 0;
    auto budget = [&](double L) {
        ++evals;
        const std::size_t nb = block_count(n);
        std::vector<Stats> val(nb);
        std::vector<double> slope(nb, 0.0);
        parallel_blocks(n, opt.threads, [&](std::size_t begin, std::size_t end, std::size_t b) {
            for (std::size_t i = begin; i < end; ++i) {
                double v = 0.0, d = 0.0;
                for (std::size_t m = 0; m < K; ++m) {
                    const double lx = logxi[i * K + m];
                    const double s = L + lx;
                    const double term = std::exp(lx + table.log_psi(s));
                    v += term;
                    d += term * table.dlog_psi(s);
                }
                val[b].add(2.0 * dt * v);
                slope[b] += 2.0 * dt * d;
            }
        });
        Stats s;
        double d = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            s.merge(val[b]);
            d += slope[b];
        }
        return Eval{s.mean(), d / static_cast<double>(n), s.stderr()};
    };

    // initial guess ignores the substitution term
    Stats pw;
    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t m = 0; m < K; ++m) v += dt * std::exp((1.0 - 1.0 / p) * logxi[i * K + m]);
        pw.add(v);
    }
    double L = p * std::log(2.0 * pw.mean() / X0);
    Eval e = budget(L);
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    double v_lo = std::numeric_limits<double>::infinity(), v_hi = 0.0;
    auto record = [&](double at, const Eval& ev) {
        if ((std::isfinite(lo) && at > lo && ev.value > v_lo) || (std::isfinite(hi) && at < hi && ev.value < v_hi))
            throw NumericalError("solve_example1: budget map is not monotone in eta");
        if (ev.value > X0) { lo = at; v_lo = ev.value; } else { hi = at; v_hi = ev.value; }
    };
    record(L, e);
    // Newton on log eta, kept inside the bracket once one exists
    for (int it = 0;; ++it) {
        if (it == 400) throw NumericalError("solve_example1: eta iteration did not converge");
        if (e.value == X0) break;
        double Ln = L - (e.value - X0) / e.slope;
        if (!std::isfinite(Ln)) Ln = e.value > X0 ? L + p : L - p;
        if (std::abs(Ln - L) <= 1e-14 * std::max(1.0, std::abs(L))) {
            L = Ln;
            break;
        }
        if (std::isfinite(lo) && std::isfinite(hi) && !(Ln > lo && Ln < hi)) Ln = 0.5 * (lo + hi);
        if (!std::isfinite(hi) && Ln > L + 4.0 * p) Ln = L + 4.0 * p;
        if (!std::isfinite(lo) && Ln < L - 4.0 * p) Ln = L - 4.0 * p;
        L = Ln;
        e = budget(L);
        record(L, e);
        if (std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 1e-15 * std::max(1.0, std::abs(L))) break;
    }
    sel.eta = std::exp(L);
    sel.diag.root_evaluations = evals;
    sel.diag.eta_mc_stderr = e.slope != 0.0 ? sel.eta * e.stderr / std::abs(e.slope) : 0.0;
    return finish(pr, std::move(sel), sc, opt);
}

QuadratureResult example2_eta_quadrature(const Problem& pr, const FiniteWeight& w, const TimeGrid& grid,
                                         bool monitoring_shift) {
    using boost::math::quadrature::gauss_kronrod;
    const auto& f = pr.family;
    const double p = f.p, r = pr.market.r, theta = pr.theta();
    const double dt = grid.dt();
    const double w1 = w.w.at(0), w2 = w.w.at(1);
    const double tail = pos_pow(w1 + w2, 1.0 / p);
    const double shift = monitoring_shift ? kMonitoringShift * std::sqrt(dt) : 0.0;
    auto inner_weight = [&](double max_level) {
        return pos_pow(w1 * f.chi_fn(0.0) + w2 * f.chi_fn(f.lambda * max_level + 1.0), 1.0 / p) + tail;
    };
    const double c = (1.0 / p - 1.0) * theta;
    QuadratureResult out;
    // t = 0 node: W = W^ = 0
    out.value = dt * inner_weight(0.0);
    auto piece = [&](const auto& fn, double a, double b, double& err) {
        double e = 0.0;
        const double v = gauss_kronrod<double, 31>::integrate(fn, a, b, 4, 1e-10, &e);
        err += e;
        return v;
    };
    for (std::size_t m = 1; m < grid.steps; ++m) {
        const double t = grid.time(m);
        const double pre = std::exp((1.0 / p - 1.0) * (r + 0.5 * theta * theta) * t - f.beta * t / p);
        const double span = 14.0 * std::sqrt(t);
        double inner_err = 0.0;
        // inner integral over u = 2 x1 - x2 in [x1, x1 + span]; kinks where x2 = x1 - shift and x2 = 0
        auto inner = [&](double x1) {
            auto g = [&](double u) {
                const double x2 = 2.0 * x1 - u;
                const double level = std::max({x1 - shift, x2, 0.0});
                return joint_density_max_bm(x1, x2, t) * std::exp(c * x2) * inner_weight(level);
            };
            std::array<double, 4> cuts{x1, x1 + shift, 2.0 * x1, x1 + span};
            std::sort(cuts.begin(), cuts.end());
            double total = 0.0, e = 0.0;
            for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
                if (cuts[k + 1] > cuts[k]) total += piece(g, cuts[k], cuts[k + 1], e);
            inner_err = std::max(inner_err, e);
            return total;
        };
        double err = 0.0, total = 0.0;
        if (shift > 0.0) total += piece(inner, 0.0, shift, err);
        total += piece(inner, shift, shift + span, err);
        err += inner_err * span;
        if (!std::isfinite(total)) throw NumericalError("example2_eta_quadrature: non-finite integral");
        if (err > 1e-8 * std::abs(total)) throw NumericalError("example2_eta_quadrature: quadrature did not converge");
        out.value += dt * pre * total;
        out.error += dt * pre * err;
    }
    return out;
}

PolicySelector solve_example2(const Problem& pr, const FiniteWeight& w, const ScenarioSet& sc, const SolveOptions& opt) {
    pr.validate();
    if (pr.example != Example::ex2) throw std::invalid_argument("solve_example2: problem is not example 2");
    require_normalized(w, "solve_example2");
    if (w.w.size() != 2) throw std::invalid_argument("solve_example2: expected two weights");
    check_paths(pr, sc);
    const double p = pr.family.p;
    PolicySelector sel;
    sel.weight = w;
    auto eta_of = [&](const PassResult& r, const Policy&, SelectorDiagnostics& d) {
        const Stats unit = r.budget();
        const double M = unit.mean();
        if (!(M > 0.0)) throw NumericalError("solve_example2: nonpositive budget integral");
        const double eta = std::pow(M / pr.x0, p);
        d.eta_mc_stderr = p * eta * unit.stderr() / M;
        d.root_evaluations = 1;
        if (opt.example2_quadrature) {
            const auto q = example2_eta_quadrature(pr, w, sc.grid, opt.quadrature_monitoring_shift);
            d.eta_quadrature = std::pow(q.value / pr.x0, p);
            d.eta_quadrature_err = p * d.eta_quadrature * q.error / q.value;
        }
        return eta;
    };
    return solve_homogeneous(pr, std::move(sel), sc, opt, eta_of);
}

double two_power_eta(double m1, double p1, double m2, double p2, double x0, int* evaluations) {
    if (!(m1 >= 0.0 && m2 >= 0.0 && m1 + m2 > 0.0)) throw std::invalid_argument("two_power_eta: need nonnegative terms with a positive sum");
    if (!(p1 > 0.0 && p2 > 0.0 && x0 > 0.0)) throw std::invalid_argument("two_power_eta: powers and x0 must be positive");
    int evals = 0;
    auto g = [&](double e) {
        ++evals;
        return std::pow(e, -1.0 / p1) * m1 + std::pow(e, -1.0 / p2) * m2 - x0;
    };
    const double guess = std::pow((m1 + m2) / x0, 0.5 * (p1 + p2));
    const double eta = monotone_root_log(g, guess * 0.5, guess * 2.0);
    if (evaluations) *evaluations = evals;
    return eta;
}

PolicySelector solve_example3(const Problem& pr, const GridAtomWeight& w, const ScenarioSet& sc, const SolveOptions& opt) {
    pr.validate();
    if (pr.example != Example::ex3) throw std::invalid_argument("solve_example3: problem is not example 3");
    require_normalized(w, "solve_example3");
    if (w.w2.size() != 1) throw std::invalid_argument("solve_example3: a single w2 atom is required");
    check_paths(pr, sc);
    PolicySelector sel;
    sel.weight = w;
    auto eta_of = [&](const PassResult& r, const Policy& unit, SelectorDiagnostics& d) {
        const Stats s1 = r.consumption_stats(), s2 = r.terminal_stats();
        const double M1 = s1.mean(), M2 = s2.mean();
        const double pb = unit.power(), pc = pr.family.p_circ;
        if (!(M1 + M2 > 0.0)) throw NumericalError("solve_example3: nonpositive budget integrals");
        double eta = 0.0;
        if (pb == pc) {
            eta = std::pow((M1 + M2) / pr.x0, pb);
            d.root_evaluations = 0;
        } else {
            eta = two_power_eta(M1, pb, M2, pc, pr.x0, &d.root_evaluations);
        }
        const double a = std::pow(eta, -1.0 / pb), b = std::pow(eta, -1.0 / pc);
        const double slope = a * M1 / pb + b * M2 / pc;  // -d budget / d log eta
        d.eta_mc_stderr = eta * r.budget(a, b).stderr() / slope;
        return eta;
    };
    return solve_homogeneous(pr, std::move(sel), sc, opt, eta_of);
}

PolicySelector solve(const Problem& pr, const Weight& w, const ScenarioSet& sc, const SolveOptions& opt) {
    const Weight nw = normalized(w);
    switch (pr.example) {
        case Example::ex1_case1:
        case Example::ex1_case2:
        case Example::ex1_case3: return solve_example1(pr, finite_weight(nw), sc, opt);
        case Example::ex2: return solve_example2(pr, finite_weight(nw), sc, opt);
        case Example::ex3: {
            const auto* g = std::get_if<GridAtomWeight>(&nw);
            if (!g) throw std::invalid_argument("solve: example 3 needs a grid-and-atom weight");
            return solve_example3(pr, *g, sc, opt);
        }
    }
    throw std::invalid_argument("solve: unknown example");
}

std::vector<Weight> weight_grid(const Problem& pr, std::size_t n) {
    if (n == 0) throw std::invalid_argument("weight_grid: empty grid");
    std::vector<Weight> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double a = n == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(n - 1);
        if (pr.example == Example::ex3)
            out.emplace_back(tilt_weight(a, pr.i1_max, pr.i1_cells, pr.epsilon + 2.0));
        else
            out.emplace_back(FiniteWeight{{a, 1.0 - a}});
    }
    return out;
}

SolutionSet sweep(const Problem& pr, const std::vector<Weight>& grid, const ScenarioSet& sc, const SolveOptions& opt) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty weight grid");
    SolutionSet out;
    out.example = pr.example;
    out.grid_description = std::to_string(grid.size()) + (pr.example == Example::ex3 ? " linear tilts of w1 with a w2 atom at " +
                                                                                            std::to_string(pr.epsilon + 2.0)
                                                                                      : " points w1 = k/(n-1), w2 = 1 - w1");
    out.selectors.reserve(grid.size());
    for (const auto& w : grid) {
        if (std::abs(norm1(w) - 1.0) > kNormTol) throw std::invalid_argument("sweep: grid weights must be normalized");
        out.selectors.push_back(solve(pr, w, sc, opt));
    }
    return out;
}

BudgetEstimate budget_check(const Problem& pr, const PolicySelector& sel, const ScenarioSet& sc, int threads) {
    const auto b = run_pass(pr, Policy(pr, sel), sc, threads, nullptr).budget();
    return {b.mean(), b.stderr()};
}

double plugback_residual(const Problem& pr, const PolicySelector& sel, const ScenarioSet& sc, std::size_t n_paths) {
    const Policy pol(pr, sel);
    const auto& f = pr.family;
    const std::size_t K = sc.grid.steps;
    n_paths = std::min(n_paths, sc.n_paths);
    double worst = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) {
        const auto xi = sc.xi_row(i), wmax = sc.wmax_row(i);
        double Q = 0.0;
        for (std::size_t m = 0; m < K; ++m) {
            const double t = sc.grid.time(m);
            const auto k = pol.coefs(wmax[m]);
            const auto node = pol.consumption(t, xi[m], k);
            const std::array<double, 2> c{node.c1, node.c2};
            const double target = sel.eta * xi[m];
            Q += sc.grid.dt() * k.rate;
            for (std::size_t j = 0; j < 2; ++j) {
                if (!(c[j] > 0.0)) continue;
                double lhs = 0.0;
                if (pr.example == Example::ex3) {
                    // int_0^Y w1(i1) du_(i1, atom)/dc_j di1, Simpson per w1 cell
                    const auto& g = std::get<GridAtomWeight>(sel.weight);
                    const double Y = std::min(f.lambda * wmax[m] + 1.0, g.i1_max);
                    const double h = g.h();
                    for (const auto& atom : g.w2) {
                        auto integrand = [&](double i1) {
                            const std::array<double, 2> idx{i1, atom.location};
                            return g.w1_at(i1) * marginal_utility(f, idx, t, c, j);
                        };
                        for (double a = 0.0; a < Y; a += h) {
                            const double b = std::min(a + h, Y);
                            lhs += atom.mass * (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b));
                        }
                    }
                } else {
                    const auto& w = finite_weight(sel.weight);
                    const auto J = weight_support(pr, wmax[m]);
                    for (std::size_t k = 0; k < 2; ++k) {
                        if (w.w[k] == 0.0) continue;
                        if (log_branch(pr)) {
                            const double coef = pr.example == Example::ex1_case1 ? (k == j ? 1.0 : 0.0) : (j == 0 ? J[k] : 1.0);
                            lhs += w.w[k] * coef / c[j];
                        } else {
                            const std::array<double, 1> idx{J[k]};
                            lhs += w.w[k] * marginal_utility(f, idx, t, c, j);
                        }
                    }
                }
                worst = std::max(worst, std::abs(lhs / target - 1.0));
            }
        }
        if (pr.example == Example::ex3) {
            // bequest condition <w, U'(X_T)>_T / T = eta xi_T
            const double XT = pol.terminal(xi[K], Q);
            const double lhs = Q / pr.horizon * std::exp(-f.beta * pr.horizon) * std::pow(XT, -f.p_circ);
            worst = std::max(worst, std::abs(lhs / (sel.eta * xi[K]) - 1.0));
        }
    }
    return worst;
}

double bequest_utility(double x, double p_circ, double beta, double T) {
    if (x == 0.0 && p_circ > 1.0) return -std::numeric_limits<double>::infinity();
    return std::exp(-beta * T) * (std::pow(x, 1.0 - p_circ) - 1.0) / (1.0 - p_circ);
}

FenchelResult fenchel_check(double p_circ, double y, double beta, double T) {
    if (!(y > 0.0) || !std::isfinite(y)) throw std::invalid_argument("fenchel_check: eta xi must be positive");
    if (!(p_circ > 0.0) || p_circ == 1.0) throw std::invalid_argument("fenchel_check: p_circ must be > 0 and != 1");
    FenchelResult r;
    r.maximizer = std::pow(y, -1.0 / p_circ) * std::exp(-beta * T / p_circ);
    r.conjugate = (p_circ * std::pow(y, 1.0 - 1.0 / p_circ) * std::exp(-beta * T / p_circ) - std::exp(-beta * T)) /
                  (1.0 - p_circ);
    r.gap = bequest_utility(r.maximizer, p_circ, beta, T) - y * r.maximizer - r.conjugate;
    return r;
}

ObjectiveEstimate scalarized_objective(const Problem& pr, const Weight& w, const PolicySelector& sel,
                                       const ScenarioSet& sc, double scale, int threads) {
    if (!(scale >= 0.0 && scale <= 1.0)) throw std::invalid_argument("scalarized_objective: scale must be in [0, 1]");
    const Policy pol(pr, sel);
    const auto& f = pr.family;
    const std::size_t K = sc.grid.steps, n = sc.n_paths;
    const double dt = sc.grid.dt(), T = pr.horizon;
    const bool ex3 = pr.example == Example::ex3;
    const GridAtomWeight* g = ex3 ? std::get_if<GridAtomWeight>(&w) : nullptr;
    if (ex3 && !g) throw std::invalid_argument("scalarized_objective: example 3 needs a grid-and-atom weight");
    const FiniteWeight* fw = ex3 ? nullptr : &finite_weight(w);

    // <w, u(t, c)> at one node
    auto score = [&](double t, double wmax, const std::array<double, 2>& c) -> Utility {
        double total = 0.0;
        if (ex3) {
            const double pb = pol.p_bar();
            const double Y = f.lambda * wmax + 1.0;
            const double A = g->w1_chi_integral(Y, f.chi_fn), B = g->w1_integral(Y);
            const double mass = g->w2_mass();
            const double disc = std::exp(-f.beta * t);
            for (std::size_t j = 0; j < 2; ++j) {
                const double coef = mass * (j == 0 ? A : B);
                if (coef == 0.0) continue;
                if (c[j] == 0.0 && pb > 1.0) return Utility::minus_infinity();
                total += coef * disc * (std::pow(c[j], 1.0 - pb) - 1.0) / (1.0 - pb);
            }
            return Utility::of(total);
        }
        const auto J = weight_support(pr, wmax);
        for (std::size_t k = 0; k < 2; ++k) {
            if (fw->w[k] == 0.0) continue;
            Utility u;
            if (log_branch(pr)) {
                const double a = pr.example == Example::ex1_case1 ? (k == 0 ? 1.0 : 0.0) : J[k];
                const double b = pr.example == Example::ex1_case1 ? (k == 0 ? 0.0 : 1.0) : 1.0;
                if ((a > 0.0 && c[0] == 0.0) || (b > 0.0 && c[1] == 0.0)) return Utility::minus_infinity();
                u = Utility::of((a > 0.0 ? a * std::log(c[0]) : 0.0) + (b > 0.0 ? b * std::log(c[1]) : 0.0));
            } else {
                const std::array<double, 1> idx{J[k]};
                u = utility_element(f, idx, t, c);
            }
            if (u.neg_inf) return u;
            total += fw->w[k] * u.value;
        }
        return Utility::of(total);
    };

    const std::size_t nb = block_count(n);
    std::vector<Stats> parts(nb);
    std::vector<char> neg(nb, 0);
    parallel_blocks(n, threads, [&](std::size_t begin, std::size_t end, std::size_t b) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto xi = sc.xi_row(i), wmax = sc.wmax_row(i);
            double v = 0.0, Q = 0.0, score_mass = 0.0;
            for (std::size_t m = 0; m < K; ++m) {
                const double t = sc.grid.time(m);
                const auto k = pol.coefs(wmax[m]);
                const auto node = pol.consumption(t, xi[m], k);
                const std::array<double, 2> c{scale * node.c1, node.c2 + (1.0 - scale) * node.c1};
                const auto u = score(t, wmax[m], c);
                if (u.neg_inf) {
                    neg[b] = 1;
                    return;
                }
                v += dt * u.value;
                if (ex3) {
                    Q += dt * k.rate;
                    score_mass += dt * g->w2_mass() * g->w1_integral(f.lambda * wmax[m] + 1.0);
                }
            }
            if (ex3) {
                const double XT = pol.terminal(xi[K], Q);
                if (score_mass > 0.0) {
                    const double U = bequest_utility(XT, f.p_circ, f.beta, T);
                    if (!std::isfinite(U)) {
                        neg[b] = 1;
                        return;
                    }
                    v += score_mass * U / T;
                }
            }
            parts[b].add(v);
        }
    });
    Stats s;
    for (std::size_t b = 0; b < nb; ++b) {
        if (neg[b]) return {Utility::minus_infinity(), 0.0};
        s.merge(parts[b]);
    }
    return {Utility::of(s.mean()), s.stderr()};
}

}  // namespace incpref
