#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "incpref/preferences.hpp"
#include "incpref/stochastic.hpp"

namespace incpref {

// ---------------------------------------------------------------------------
// Mean-variance frontier

struct FrontierPoint {
    double p = 0.0;  // +inf for the minimum-variance portfolio
    std::vector<double> pi;
    double mean = 0.0;
    double variance = 0.0;
};

std::vector<FrontierPoint> frontier(const std::vector<double>& mu, const std::vector<std::vector<double>>& cov,
                                    const std::vector<double>& p_list);

// ---------------------------------------------------------------------------
// Problem description

enum class Example { ex1_case1, ex1_case2, ex1_case3, ex2, ex3 };

std::string to_string(Example e);
Example example_from_string(const std::string& s);

struct Problem {
    Example example = Example::ex1_case1;
    MarketParams market;
    double horizon = 1.0;
    double x0 = 100.0;
    UtilityFamily family;
    // Example 3 weights: w1 grid on [0, i1_max], w2 atom at epsilon + 2
    double epsilon = 0.2;
    double i1_max = 2.0;
    std::size_t i1_cells = 100;

    void validate() const;
    double theta() const { return market.theta(market.sigma0); }
    bool has_bequest() const { return example == Example::ex3; }
};

// Market r = 0.001, mu = 0.02, sigma0 = 0.36, T = 1, X0 = 100 and the per-example parameters
// (p = 6, chi = 3, [kappa1, kappa2] = [1, 2], beta = 0.05, lambda = 0.2, exp-OU kappa = 0.1, varsigma = -0.8).
Problem default_problem(Example e);

double rho_p(double r, double theta, double p);

// Root of 1 - A x^{1-p}/(1-p) = y x^p for p > 1, A >= 0, y > 0.
double psi_case3(double y, double A, double p);
double psi_case3_residual(double x, double y, double A, double p);

// Smooth table of log psi against log y for one (A, p), accurate to ~1e-13 relative.
class PsiTable {
public:
    PsiTable(double A, double p, double s_lo = -40.0, double s_hi = 40.0, double h = 0.004);
    double log_psi(double s) const;           // s = log y
    double dlog_psi(double s) const;          // d log psi / d log y
    double operator()(double y) const { return std::exp(log_psi(std::log(y))); }

private:
    double A_, p_, s_lo_, s_hi_, h_;
    std::vector<double> z_, dz_;
};

// ---------------------------------------------------------------------------
// Selectors

struct SelectorDiagnostics {
    double budget = 0.0;           // in-sample MC budget at the solved eta
    double budget_stderr = 0.0;
    double budget_residual = 0.0;  // (budget - x0) / x0
    double quotient_min = std::numeric_limits<double>::quiet_NaN();
    double quotient_max = std::numeric_limits<double>::quiet_NaN();
    std::size_t quotient_violations = 0;
    double eta_mc_stderr = 0.0;
    double eta_quadrature = std::numeric_limits<double>::quiet_NaN();
    double eta_quadrature_err = std::numeric_limits<double>::quiet_NaN();
    double sigma_violation_fraction = 0.0;
    int root_evaluations = 0;
};

struct PolicySelector {
    Weight weight;
    double eta = 0.0;
    SelectorDiagnostics diag;
    // materialized values for the first stored_paths paths, row-major (path, time index)
    std::size_t stored_paths = 0;
    std::vector<double> c1, c2, C;
    std::vector<double> x_terminal;
};

struct SolutionSet {
    Example example = Example::ex1_case1;
    std::string grid_description;
    std::vector<PolicySelector> selectors;
};

struct SolveOptions {
    int threads = 1;
    std::size_t store_paths = 0;
    bool example2_quadrature = true;
    // continuity correction of the discrete running maximum in the quadrature route
    bool quadrature_monitoring_shift = true;
};

// Evaluates a solved selector at arbitrary states (used by portfolios and replication).
class Policy {
public:
    Policy(const Problem& problem, const PolicySelector& selector);

    struct Node {
        double c1 = 0.0;
        double c2 = 0.0;
        double total() const { return c1 + c2; }
    };

    // State-dependent part of the feedback: c_j = root_j * (eta xi e^{beta t})^{-1/p}
    struct Coefs {
        double root1 = 0.0;
        double root2 = 0.0;
        double rate = 0.0;  // ||w(t)||_1
        // derivatives in Y = lambda * wmax + 1
        double dlog1 = 0.0;
        double dlog2 = 0.0;
        double drate = 0.0;
    };
    Coefs coefs(double wmax) const;
    Node consumption(double t, double xi, const Coefs& k) const;
    Node consumption(double t, double xi, double wmax) const { return consumption(t, xi, coefs(wmax)); }

    // Example 3: A = int_0^Y w1 chi, B = int_0^Y w1 with Y = lambda * wmax + 1
    double A(double wmax) const;
    double B(double wmax) const;
    // bequest; Q = int_0^T ||w(t)||_1 dt along the path
    double terminal(double xi_T, double Q) const;
    // Example 2 attention weight a = w1 chi_0 + w2 chi_{lambda W^ + 1}
    double attention(double wmax) const;
    // exponent of eta xi in the consumption feedback
    double power() const;
    // -xi dC/dxi at the node
    double risk_tolerance(double xi, const Node& c) const;
    // dC/dY and d||w||_1/dY with Y = lambda * wmax + 1
    double dC_dY(double wmax, const Node& c) const { return dC_dY(coefs(wmax), c); }
    double dC_dY(const Coefs& k, const Node& c) const { return c.c1 * k.dlog1 + c.c2 * k.dlog2; }
    double drate_dY(double wmax) const { return coefs(wmax).drate; }

    double p_bar() const { return p_bar_; }
    double eta() const { return eta_; }
    const Problem& problem() const { return problem_; }

private:
    const GridAtomWeight& grid() const { return std::get<GridAtomWeight>(weight_); }

    Problem problem_;
    Weight weight_;
    double eta_;
    double p_bar_ = 0.0;
    double atom_mass_ = 1.0;
    double w1_ = 0.0, w2_ = 0.0;
    std::shared_ptr<PsiTable> psi_;
};

// Solver convention for which J point each weight component multiplies:
// case I (1, 2), case II (chi, 0), case III (kappa1, kappa2), example 2 (0, lambda W^ + 1).
std::vector<double> weight_support(const Problem& problem, double wmax);

PolicySelector solve_example1(const Problem& problem, const FiniteWeight& w, const ScenarioSet& paths,
                              const SolveOptions& opt = {});
PolicySelector solve_example2(const Problem& problem, const FiniteWeight& w, const ScenarioSet& paths,
                              const SolveOptions& opt = {});
// Root in eta of eta^{-1/p1} m1 + eta^{-1/p2} m2 = x0, found on log eta.
double two_power_eta(double m1, double p1, double m2, double p2, double x0, int* evaluations = nullptr);

PolicySelector solve_example3(const Problem& problem, const GridAtomWeight& w, const ScenarioSet& paths,
                              const SolveOptions& opt = {});
// Normalizes the weight and dispatches on the example.
PolicySelector solve(const Problem& problem, const Weight& w, const ScenarioSet& paths, const SolveOptions& opt = {});

std::vector<Weight> weight_grid(const Problem& problem, std::size_t n);
SolutionSet sweep(const Problem& problem, const std::vector<Weight>& grid, const ScenarioSet& paths,
                  const SolveOptions& opt = {});

// Example 2 eta^{1/p} X0 by quadrature of the joint law of (W^, W); left-point in time on `grid`.
struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
};
QuadratureResult example2_eta_quadrature(const Problem& problem, const FiniteWeight& w, const TimeGrid& grid,
                                         bool monitoring_shift);

// Budget E[int xi C dt + xi_T X_T] on any scenario set at the selector's eta.
struct BudgetEstimate {
    double mean = 0.0;
    double stderr = 0.0;
};
BudgetEstimate budget_check(const Problem& problem, const PolicySelector& selector, const ScenarioSet& paths,
                            int threads = 1);

// Largest relative first-order-condition residual over all nodes of the first n paths.
double plugback_residual(const Problem& problem, const PolicySelector& selector, const ScenarioSet& paths,
                         std::size_t n_paths);

// E[int <w, u(t, c_t) + U(X_T)/T> dt] for the selector's policy scored with weight w.
// consumption_scale multiplies c1 and moves the removed amount to c2 (budget-neutral).
struct ObjectiveEstimate {
    Utility value;
    double stderr = 0.0;
};
ObjectiveEstimate scalarized_objective(const Problem& problem, const Weight& w, const PolicySelector& selector,
                                       const ScenarioSet& paths, double consumption_scale = 1.0, int threads = 1);

// Fenchel-Young check for U(x) = e^{-beta T}(x^{1-p}-1)/(1-p).
struct FenchelResult {
    double gap = 0.0;
    double maximizer = 0.0;
    double conjugate = 0.0;
};
double bequest_utility(double x, double p_circ, double beta, double T);
FenchelResult fenchel_check(double p_circ, double eta_xi, double beta = 0.0, double T = 1.0);

}  // namespace incpref
