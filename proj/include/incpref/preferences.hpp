#pragma once

#include <compare>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "incpref/geometry.hpp"

namespace incpref {

enum class FamilyKind { case1_independent, case2_attention, case3_substitution, ex2_socialization, ex3_hybrid };

std::string to_string(FamilyKind k);
FamilyKind family_kind_from_string(const std::string& s);

// f(i) = offset + scale * min(i, cap). With scale >= 0 it is nondecreasing and,
// for finite cap, bounded on R_+.
struct ParamFn {
    double scale = 1.0;
    double cap = std::numeric_limits<double>::infinity();
    double offset = 0.0;

    double operator()(double i) const { return offset + scale * std::min(i, cap); }
    double derivative(double i) const { return i < cap ? scale : 0.0; }
};

struct UtilityFamily {
    FamilyKind kind = FamilyKind::case1_independent;
    double p = 6.0;
    double chi = 3.0;
    double kappa1 = 1.0;
    double kappa2 = 2.0;
    double beta = 0.0;
    double lambda = 0.0;
    double p_circ = 5.0;
    ParamFn chi_fn{1.0, 5.0, 0.0};
    ParamFn p_fn{3.0, 5.0, 0.0};

    void validate() const;
};

// Utility value with an explicit minus-infinity state.
struct Utility {
    double value = 0.0;
    bool neg_inf = false;

    static Utility minus_infinity() { return {0.0, true}; }
    static Utility of(double v) { return {v, false}; }

    friend std::partial_ordering operator<=>(const Utility& a, const Utility& b) {
        if (a.neg_inf || b.neg_inf) return b.neg_inf <=> a.neg_inf;
        return a.value <=> b.value;
    }
    friend bool operator==(const Utility& a, const Utility& b) {
        return a.neg_inf == b.neg_inf && (a.neg_inf || a.value == b.value);
    }
};

// u_i(t, c). i has the family's index dimension (1, or 2 for ex3_hybrid).
Utility utility_element(const UtilityFamily& f, std::span<const double> i, double t, std::span<const double> c);
// d u_i / d c_j, j in {0, 1} (0-based good index)
double marginal_utility(const UtilityFamily& f, std::span<const double> i, double t, std::span<const double> c,
                        std::size_t j);

enum class Comparison { dominates, dominated, equivalent, incomparable };
std::string to_string(Comparison c);

// Pareto comparison over the index set. Uses the reduced set J when the family is
// scaling-reducible, otherwise vertices plus a grid_per_dim^d interior grid.
Comparison compare_bundles(const UtilityFamily& f, const Box& index_set, double t, std::span<const double> c,
                           std::span<const double> c2, std::size_t grid_per_dim = 9);

// Boundary indices J (ascending). For ex2 the upper end is read from index_set.
std::optional<std::vector<std::vector<double>>> reduce_to_J(const UtilityFamily& f,
                                                            const std::optional<Box>& index_set = std::nullopt);

// Finite weight on J, or a grid density on [0, i1_max] times atoms in i2 (Example 3).
struct FiniteWeight {
    std::vector<double> w;
};

struct Atom {
    double location = 2.2;
    double mass = 1.0;
};

struct GridAtomWeight {
    double i1_max = 2.0;
    std::vector<double> w1;  // node values on a uniform grid over [0, i1_max]
    std::vector<Atom> w2;

    double h() const { return i1_max / static_cast<double>(w1.size() - 1); }
    // piecewise-linear interpolant of w1, zero outside [0, i1_max]
    double w1_at(double i1) const;
    // exact integrals of the interpolant (times chi_fn for the first) over [0, y]
    double w1_integral(double y) const;
    double w1_chi_integral(double y, const ParamFn& chi) const;
    double w2_mass() const;
};

using Weight = std::variant<FiniteWeight, GridAtomWeight>;

// Trapezoid rule for the w1 grid.
double norm1(const Weight& w);
Weight normalized(const Weight& w);

// Linear tilt family on [0, i1_max]: (1-a)/i1_max + a * 2 i / i1_max^2, each of unit mass.
GridAtomWeight tilt_weight(double alpha, double i1_max, std::size_t cells, double atom_location);

// Risk-linked function for a w2 made of atoms and an optional density sampled on a
// uniform grid over [density_lo, density_hi].
struct W2Measure {
    std::vector<Atom> atoms;
    std::vector<double> density;
    double density_lo = 1.0;
    double density_hi = 1.0;
    std::size_t quad_nodes = 401;

    double density_at(double i2) const;
};

double risk_linked_theta(const ParamFn& p_fn, const W2Measure& w2, double sigma, double x);
double risk_linked_theta_inverse(const ParamFn& p_fn, const W2Measure& w2, double sigma, double y);

}  // namespace incpref
