#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "incpref/geometry.hpp"
#include "incpref/stochastic.hpp"

namespace incpref {

// What a selector may look at: the path up to and including index l and the current set.
struct PathState {
    const BrownianPath& path;
    std::size_t l;
    double t;
    const Box& current;
};

// Drift selectors return a vector in R^d; diffusion selectors return the single
// column (m = 1) of the d x m matrix.
using Selector = std::function<std::vector<double>(const PathState&)>;

Selector constant_selector(std::vector<double> v);

struct ComponentConfig {
    int q = 1;
    Box i0;
    std::vector<Selector> drift;
    std::vector<Selector> diffusion;
};

struct IndexSetConfig {
    std::size_t d = 1;
    Box range;
    std::array<ComponentConfig, 3> components;

    void validate() const;
};

struct IndexSetPath {
    TimeGrid grid;
    std::vector<Box> sets;
    std::optional<std::size_t> stop_index;
};

// Singleton test used by the stopping rule.
constexpr double kSingletonTol = 1e-12;

std::vector<Box> euler_component(const ComponentConfig& cfg, const BrownianPath& path, std::size_t K);
IndexSetPath assemble(const IndexSetConfig& cfg, const BrownianPath& path, std::size_t K);

IndexSetConfig example2_index_config(double lambda);
IndexSetConfig example3_index_config(double lambda, const MarketParams& market);

// Closed-form index sets. Example 3 needs the (exactly stepped) volatility path.
IndexSetPath exact_index_set(int example, const BrownianPath& path, double lambda,
                             std::span<const double> vol = {});

struct CastaingFamily {
    // selectors[k][l] is the value of selector k at grid time l
    std::vector<std::vector<std::vector<double>>> selectors;
};

// max over grid times of d_H(set, bounding box of selector values)
double closure_gap(const CastaingFamily& family, const IndexSetPath& sets);

struct ConvergenceRow {
    std::size_t K = 0;
    double mean_dh = 0.0;
    double stderr = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

struct ConvergenceSetup {
    int example = 2;
    double lambda = 0.2;
    MarketParams market;
    double t = 1.0;
    std::vector<std::size_t> K_list{32, 64, 128, 256, 512};
    std::size_t K_ref = 4096;
    std::size_t n_paths = 100;
    std::uint64_t seed = 0;
    int threads = 1;
};

std::vector<ConvergenceRow> convergence_study(const IndexSetConfig& cfg, const ConvergenceSetup& setup);

}  // namespace incpref
