#include "incpref/preferences.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "incpref/numerics.hpp"

namespace incpref {

namespace {

std::size_t index_dim(FamilyKind k) { return k == FamilyKind::ex3_hybrid ? 2 : 1; }

void check_args(const UtilityFamily& f, std::span<const double> i, std::span<const double> c) {
    if (i.size() != index_dim(f.kind)) throw std::invalid_argument("utility: index dimension mismatch");
    if (c.size() != 2) throw std::invalid_argument("utility: two goods expected");
    for (double x : c)
        if (!(x >= 0.0)) throw std::invalid_argument("utility: consumption must be >= 0");
}

// (x^{1-p} - 1)/(1-p); -inf when x = 0 and p > 1
Utility power_term(double x, double p) {
    if (x == 0.0 && p > 1.0) return Utility::minus_infinity();
    return Utility::of((std::pow(x, 1.0 - p) - 1.0) / (1.0 - p));
}

// a*A + b*B with zero coefficients dropping their term entirely
Utility combine(double a, Utility A, double b, Utility B, double scale) {
    if ((a != 0.0 && A.neg_inf) || (b != 0.0 && B.neg_inf)) return Utility::minus_infinity();
    double v = 0.0;
    if (a != 0.0) v += a * A.value;
    if (b != 0.0) v += b * B.value;
    return Utility::of(scale * v);
}

bool in_closed(double x, double lo, double hi) { return x >= lo && x <= hi; }

}  // namespace

std::string to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::case1_independent: return "case1_independent";
        case FamilyKind::case2_attention: return "case2_attention";
        case FamilyKind::case3_substitution: return "case3_substitution";
        case FamilyKind::ex2_socialization: return "ex2_socialization";
        case FamilyKind::ex3_hybrid: return "ex3_hybrid";
    }
    return "?";
}

FamilyKind family_kind_from_string(const std::string& s) {
    for (auto k : {FamilyKind::case1_independent, FamilyKind::case2_attention, FamilyKind::case3_substitution,
                   FamilyKind::ex2_socialization, FamilyKind::ex3_hybrid})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown utility family '" + s + "'");
}

void UtilityFamily::validate() const {
    if (!(p > 0.0) || p == 1.0) throw std::invalid_argument("utility: p must be > 0 and != 1");
    if (kind == FamilyKind::case3_substitution) {
        if (!(p > 1.0)) throw std::invalid_argument("utility: case3 requires p > 1");
        if (!(kappa1 > 0.0) || !(kappa1 <= kappa2)) throw std::invalid_argument("utility: case3 requires 0 < kappa1 <= kappa2");
    }
    if (kind == FamilyKind::case2_attention && !(chi > 0.0)) throw std::invalid_argument("utility: chi must be > 0");
    for (const ParamFn* fn : {&chi_fn, &p_fn}) {
        if (fn->scale < 0.0) throw std::invalid_argument("utility: parameter functions must be nondecreasing");
        if (fn->scale > 0.0 && !std::isfinite(fn->cap)) throw std::invalid_argument("utility: parameter functions must be bounded");
    }
    if (kind == FamilyKind::ex3_hybrid) {
        if (!(p_circ > 0.0) || p_circ == 1.0) throw std::invalid_argument("utility: p_circ must be > 0 and != 1");
        // p_fn on [1, inf) must avoid 1
        const double lo = p_fn(1.0), hi = p_fn(std::max(1.0, p_fn.cap));
        if (!(lo > 0.0) || (lo <= 1.0 && hi >= 1.0)) throw std::invalid_argument("utility: p_fn must stay in (0,inf) \\ {1} on [1,inf)");
    }
    if (lambda < 0.0) throw std::invalid_argument("utility: lambda must be >= 0");
}

Utility utility_element(const UtilityFamily& f, std::span<const double> i, double t, std::span<const double> c) {
    check_args(f, i, c);
    const double p = f.p;
    switch (f.kind) {
        case FamilyKind::case1_independent: {
            if (i[0] == 1.0) return power_term(c[0], p);
            if (i[0] == 2.0) return power_term(c[1], p);
            if (i[0] > 1.0 && i[0] < 2.0) return Utility::minus_infinity();
            return Utility::of(0.0);
        }
        case FamilyKind::case2_attention: {
            if (!in_closed(i[0], 0.0, f.chi)) return Utility::of(0.0);
            return combine(i[0], power_term(c[0], p), 1.0, power_term(c[1], p), 1.0);
        }
        case FamilyKind::case3_substitution: {
            if (!in_closed(i[0], f.kappa1, f.kappa2)) return Utility::of(0.0);
            if (c[0] == 0.0 || c[1] == 0.0) return Utility::minus_infinity();
            const double a = std::pow(c[0], 1.0 - p), b = std::pow(c[1], 1.0 - p);
            return Utility::of((a + b) / (1.0 - p) - i[0] * a * b / ((1.0 - p) * (1.0 - p)));
        }
        case FamilyKind::ex2_socialization: {
            if (i[0] < 0.0) return Utility::of(0.0);
            return combine(f.chi_fn(i[0]), power_term(c[0], p), 1.0, power_term(c[1], p), std::exp(-f.beta * t));
        }
        case FamilyKind::ex3_hybrid: {
            if (i[0] < 0.0 || i[1] < 1.0) return Utility::of(0.0);
            const double pi = f.p_fn(i[1]);
            return combine(f.chi_fn(i[0]), power_term(c[0], pi), 1.0, power_term(c[1], pi), std::exp(-f.beta * t));
        }
    }
    return Utility::of(0.0);
}

double marginal_utility(const UtilityFamily& f, std::span<const double> i, double t, std::span<const double> c,
                        std::size_t j) {
    check_args(f, i, c);
    if (j > 1) throw std::invalid_argument("marginal_utility: good index out of range");
    if (!(c[j] > 0.0)) throw std::invalid_argument("marginal_utility: c_j must be > 0");
    const double p = f.p;
    switch (f.kind) {
        case FamilyKind::case1_independent:
            if (i[0] == 1.0 && j == 0) return std::pow(c[0], -p);
            if (i[0] == 2.0 && j == 1) return std::pow(c[1], -p);
            return 0.0;
        case FamilyKind::case2_attention:
            if (!in_closed(i[0], 0.0, f.chi)) return 0.0;
            return (j == 0 ? i[0] : 1.0) * std::pow(c[j], -p);
        case FamilyKind::case3_substitution: {
            if (!in_closed(i[0], f.kappa1, f.kappa2)) return 0.0;
            const double other = std::pow(c[1 - j], 1.0 - p);
            return std::pow(c[j], -p) * (1.0 - i[0] * other / (1.0 - p));
        }
        case FamilyKind::ex2_socialization:
            if (i[0] < 0.0) return 0.0;
            return std::exp(-f.beta * t) * (j == 0 ? f.chi_fn(i[0]) : 1.0) * std::pow(c[j], -p);
        case FamilyKind::ex3_hybrid: {
            if (i[0] < 0.0 || i[1] < 1.0) return 0.0;
            const double pi = f.p_fn(i[1]);
            return std::exp(-f.beta * t) * (j == 0 ? f.chi_fn(i[0]) : 1.0) * std::pow(c[j], -pi);
        }
    }
    return 0.0;
}

std::string to_string(Comparison c) {
    switch (c) {
        case Comparison::dominates: return "dominates";
        case Comparison::dominated: return "dominated";
        case Comparison::equivalent: return "equivalent";
        case Comparison::incomparable: return "incomparable";
    }
    return "?";
}

std::optional<std::vector<std::vector<double>>> reduce_to_J(const UtilityFamily& f, const std::optional<Box>& index_set) {
    switch (f.kind) {
        case FamilyKind::case1_independent: return std::vector<std::vector<double>>{{1.0}, {2.0}};
        case FamilyKind::case2_attention: return std::vector<std::vector<double>>{{0.0}, {f.chi}};
        case FamilyKind::case3_substitution: return std::vector<std::vector<double>>{{f.kappa1}, {f.kappa2}};
        case FamilyKind::ex2_socialization: {
            if (!index_set) throw std::invalid_argument("reduce_to_J: ex2 needs the current index set");
            return std::vector<std::vector<double>>{{index_set->lo(0)}, {index_set->hi(0)}};
        }
        case FamilyKind::ex3_hybrid: return std::nullopt;
    }
    return std::nullopt;
}

Comparison compare_bundles(const UtilityFamily& f, const Box& index_set, double t, std::span<const double> c,
                           std::span<const double> c2, std::size_t grid_per_dim) {
    std::vector<std::vector<double>> pts;
    if (auto J = reduce_to_J(f, index_set)) {
        pts = *J;
    } else {
        pts = index_set.vertices();
        const std::size_t d = index_set.dim();
        const std::size_t n = grid_per_dim;
        std::size_t total = 1;
        for (std::size_t k = 0; k < d; ++k) total *= n;
        for (std::size_t m = 0; m < total; ++m) {
            std::vector<double> p(d);
            std::size_t r = m;
            for (std::size_t k = 0; k < d; ++k) {
                const double u = n > 1 ? static_cast<double>(r % n) / static_cast<double>(n - 1) : 0.5;
                p[k] = index_set.lo(k) + u * index_set.width(k);
                r /= n;
            }
            pts.push_back(std::move(p));
        }
    }
    bool some_greater = false, some_less = false;
    for (const auto& i : pts) {
        const Utility a = utility_element(f, i, t, c);
        const Utility b = utility_element(f, i, t, c2);
        if (a.neg_inf || b.neg_inf) {
            if (a.neg_inf && !b.neg_inf) some_less = true;
            if (b.neg_inf && !a.neg_inf) some_greater = true;
            continue;
        }
        const double tol = 1e-12 * std::max({1.0, std::abs(a.value), std::abs(b.value)});
        if (a.value > b.value + tol) some_greater = true;
        if (a.value < b.value - tol) some_less = true;
    }
    if (some_greater && some_less) return Comparison::incomparable;
    if (some_greater) return Comparison::dominates;
    if (some_less) return Comparison::dominated;
    return Comparison::equivalent;
}

double GridAtomWeight::w1_at(double i1) const {
    if (i1 < 0.0 || i1 > i1_max || w1.size() < 2) return 0.0;
    const double u = i1 / h();
    const std::size_t k = std::min(static_cast<std::size_t>(u), w1.size() - 2);
    const double frac = u - static_cast<double>(k);
    return w1[k] + frac * (w1[k + 1] - w1[k]);
}

namespace {

// Simpson on [a, b] is exact for the product of two linear pieces.
template <class F>
double simpson(F f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

template <class F>
double integrate_pl(const GridAtomWeight& w, double y, double kink, F weight_fn) {
    const double top = std::min(y, w.i1_max);
    if (!(top > 0.0)) return 0.0;
    double s = 0.0;
    const double h = w.h();
    auto g = [&](double x) { return w.w1_at(x) * weight_fn(x); };
    for (std::size_t k = 0; k + 1 < w.w1.size(); ++k) {
        const double a = static_cast<double>(k) * h;
        if (a >= top) break;
        const double b = std::min(static_cast<double>(k + 1) * h, top);
        if (kink > a && kink < b) {
            s += simpson(g, a, kink) + simpson(g, kink, b);
        } else {
            s += simpson(g, a, b);
        }
    }
    return s;
}

}  // namespace

double GridAtomWeight::w1_integral(double y) const {
    return integrate_pl(*this, y, -1.0, [](double) { return 1.0; });
}

double GridAtomWeight::w1_chi_integral(double y, const ParamFn& chi) const {
    return integrate_pl(*this, y, chi.cap, chi);
}

double GridAtomWeight::w2_mass() const {
    double m = 0.0;
    for (const auto& a : w2) m += a.mass;
    return m;
}

double norm1(const Weight& w) {
    if (const auto* fw = std::get_if<FiniteWeight>(&w)) {
        double s = 0.0;
        for (double x : fw->w) {
            if (x < 0.0) throw std::invalid_argument("weight: negative entry");
            s += x;
        }
        return s;
    }
    const auto& g = std::get<GridAtomWeight>(w);
    if (g.w1.size() < 2) throw std::invalid_argument("weight: w1 grid needs at least 2 nodes");
    for (double x : g.w1)
        if (x < 0.0) throw std::invalid_argument("weight: negative entry");
    for (const auto& a : g.w2)
        if (a.mass < 0.0) throw std::invalid_argument("weight: negative atom mass");
    return trapezoid(g.w1, g.h()) * g.w2_mass();
}

Weight normalized(const Weight& w) {
    const double n = norm1(w);
    if (!(n > 0.0)) throw std::invalid_argument("weight: zero norm");
    if (const auto* fw = std::get_if<FiniteWeight>(&w)) {
        FiniteWeight out = *fw;
        for (double& x : out.w) x /= n;
        return out;
    }
    GridAtomWeight g = std::get<GridAtomWeight>(w);
    const double n1 = trapezoid(g.w1, g.h());
    for (double& x : g.w1) x /= n1;
    const double n2 = g.w2_mass();
    for (auto& a : g.w2) a.mass /= n2;
    return g;
}

GridAtomWeight tilt_weight(double alpha, double i1_max, std::size_t cells, double atom_location) {
    if (cells < 1) throw std::invalid_argument("tilt_weight: need at least one cell");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("tilt_weight: alpha outside [0,1]");
    GridAtomWeight g;
    g.i1_max = i1_max;
    g.w1.resize(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) {
        const double i = i1_max * static_cast<double>(k) / static_cast<double>(cells);
        g.w1[k] = (1.0 - alpha) / i1_max + alpha * 2.0 * i / (i1_max * i1_max);
    }
    g.w2 = {{atom_location, 1.0}};
    return g;
}

double W2Measure::density_at(double i2) const {
    if (density.size() < 2 || i2 < density_lo || i2 > density_hi) return 0.0;
    const double h = (density_hi - density_lo) / static_cast<double>(density.size() - 1);
    const double u = (i2 - density_lo) / h;
    const std::size_t k = std::min(static_cast<std::size_t>(u), density.size() - 2);
    const double frac = u - static_cast<double>(k);
    return density[k] + frac * (density[k + 1] - density[k]);
}

double risk_linked_theta(const ParamFn& p_fn, const W2Measure& w2, double sigma, double x) {
    if (!(x > 0.0)) throw std::invalid_argument("risk_linked_theta: x must be > 0");
    const double lo = sigma + 1.0, hi = sigma + 2.0;
    double s = 0.0;
    for (const auto& a : w2.atoms)
        if (in_closed(a.location, lo, hi)) s += a.mass * std::pow(x, -p_fn(a.location));
    if (w2.density.size() >= 2) {
        const std::size_t n = std::max<std::size_t>(w2.quad_nodes, 2);
        std::vector<double> v(n);
        const double h = (hi - lo) / static_cast<double>(n - 1);
        for (std::size_t k = 0; k < n; ++k) {
            const double i2 = lo + h * static_cast<double>(k);
            v[k] = w2.density_at(i2) * std::pow(x, -p_fn(i2));
        }
        s += trapezoid(v, h);
    }
    return s;
}

double risk_linked_theta_inverse(const ParamFn& p_fn, const W2Measure& w2, double sigma, double y) {
    if (!(y > 0.0)) throw std::invalid_argument("risk_linked_theta_inverse: y must be > 0");
    const double lo = sigma + 1.0, hi = sigma + 2.0;
    std::size_t in_range = 0;
    const Atom* only = nullptr;
    for (const auto& a : w2.atoms)
        if (in_closed(a.location, lo, hi) && a.mass > 0.0) {
            ++in_range;
            only = &a;
        }
    if (w2.density.size() < 2 && in_range == 1) return std::pow(y / only->mass, -1.0 / p_fn(only->location));
    if (risk_linked_theta(p_fn, w2, sigma, 1.0) == 0.0)
        throw std::invalid_argument("risk_linked_theta_inverse: w2 has no mass on [sigma+1, sigma+2]");
    return monotone_root_log([&](double x) { return risk_linked_theta(p_fn, w2, sigma, x) - y; }, 0.5, 2.0);
}

}  // namespace incpref
