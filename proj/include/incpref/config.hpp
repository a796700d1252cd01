#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "incpref/portfolio.hpp"
#include "incpref/solver.hpp"

namespace incpref {

// Invalid configuration; key is the JSON pointer of the offending entry ("" for the whole file).
struct ConfigError : std::runtime_error {
    ConfigError(std::string key, const std::string& what);
    std::string key;
};

struct FrontierConfig {
    std::vector<double> mu{0.1, 0.2};
    std::vector<std::vector<double>> cov{{0.04, 0.0}, {0.0, 0.09}};
    std::vector<double> p_list;  // defaults to 0.5, 1, 2, 5, inf
};

struct ExperimentConfig {
    std::string preset;
    Problem problem;
    bool has_problem = true;  // false for the frontier-only preset

    std::size_t steps = 200;
    std::size_t paths = 10000;
    std::uint64_t seed = 0;
    std::size_t fine_factor = 1;
    int threads = 1;
    std::string out = "out";

    std::size_t weight_count = 100;

    std::size_t store_paths = 3;
    bool quadrature = true;

    std::size_t portfolio_weights = 3;
    std::size_t portfolio_paths = 8;
    ConditionalEstimator estimator;

    std::size_t index_path = 0;

    std::vector<std::size_t> conv_K{32, 64, 128, 256, 512};
    std::size_t conv_K_ref = 4096;
    std::size_t conv_paths = 100;
    double conv_t = 1.0;

    FrontierConfig frontier;
};

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

// Overlays a JSON document on a preset (its "preset" key, else `base`). Unknown keys,
// wrong types and out-of-range values raise ConfigError with the key path.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& base = "");
ExperimentConfig load_config(const std::string& path, const std::string& base = "");

// Full configuration as JSON (round-trips through parse_config).
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace incpref
