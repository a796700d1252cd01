#include "incpref/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unistd.h>

#include "incpref/index_set.hpp"

namespace incpref {

using nlohmann::json;

Csv::Csv(std::vector<std::string> columns) : ncols_(columns.size()) {
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (k) text_ += ',';
        text_ += columns[k];
    }
    text_ += '\n';
}

void Csv::sep() {
    if (col_ == ncols_) throw std::logic_error("Csv: too many fields in row");
    if (col_++) text_ += ',';
}

Csv& Csv::add(double v) {
    sep();
    text_ += format_double(v);
    return *this;
}

Csv& Csv::add(std::size_t v) {
    sep();
    text_ += std::to_string(v);
    return *this;
}

Csv& Csv::add(const std::string& v) {
    sep();
    text_ += v;
    return *this;
}

Csv& Csv::empty() {
    sep();
    return *this;
}

void Csv::end_row() {
    if (col_ != ncols_) throw std::logic_error("Csv: incomplete row");
    text_ += '\n';
    col_ = 0;
    ++rows_;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

namespace {

const Problem& problem_of(const ExperimentConfig& cfg, const char* verb) {
    if (!cfg.has_problem) throw ConfigError("/example", std::string(verb) + " needs an example");
    return cfg.problem;
}

ScenarioSet scenarios_of(const ExperimentConfig& cfg) {
    return simulate_scenarios(TimeGrid(cfg.problem.horizon, cfg.steps), cfg.problem.market, cfg.seed, cfg.paths,
                              cfg.threads, 0, cfg.fine_factor);
}

SolveOptions solve_options(const ExperimentConfig& cfg, std::size_t store) {
    SolveOptions o;
    o.threads = cfg.threads;
    o.store_paths = store;
    o.example2_quadrature = cfg.quadrature;
    return o;
}

// Weight columns: (w1, w2) on J, or (tilt, atom location) for the grid-and-atom weights.
std::vector<std::string> weight_columns(const Problem& pr) {
    if (pr.example == Example::ex3) return {"tilt", "atom"};
    return {"w1", "w2"};
}

void add_weight(Csv& csv, const Problem& pr, const Weight& w, std::size_t id, std::size_t n) {
    if (pr.example == Example::ex3) {
        csv.add(n == 1 ? 0.5 : static_cast<double>(id) / static_cast<double>(n - 1));
        csv.add(std::get<GridAtomWeight>(w).w2.at(0).location);
    } else {
        const auto& f = std::get<FiniteWeight>(w);
        csv.add(f.w[0]).add(f.w[1]);
    }
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<std::size_t> spread(std::size_t n, std::size_t m) {
    m = std::min(m, n);
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < m; ++k) ids.push_back(m == 1 ? 0 : k * (n - 1) / (m - 1));
    return ids;
}

}  // namespace

CommandOutput cmd_frontier(const ExperimentConfig& cfg) {
    const auto& fc = cfg.frontier;
    std::vector<FrontierPoint> pts;
    try {
        pts = frontier(fc.mu, fc.cov, fc.p_list);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("/frontier", e.what());
    } catch (const std::domain_error& e) {
        throw ConfigError("/frontier/cov", e.what());
    }
    std::vector<std::string> cols{"p"};
    for (std::size_t k = 0; k < fc.mu.size(); ++k) cols.push_back("pi" + std::to_string(k + 1));
    cols.push_back("mean");
    cols.push_back("variance");
    Csv csv(cols);
    for (const auto& p : pts) {
        csv.add(p.p);
        for (double x : p.pi) csv.add(x);
        csv.add(p.mean).add(p.variance);
        csv.end_row();
    }
    return {{{"frontier.csv", csv.text()}}};
}

CommandOutput cmd_index_set(const ExperimentConfig& cfg) {
    const Problem& pr = problem_of(cfg, "index-set");
    IndexSetConfig ic;
    if (pr.example == Example::ex2) ic = example2_index_config(pr.family.lambda);
    else if (pr.example == Example::ex3) ic = example3_index_config(pr.family.lambda, pr.market);
    else throw ConfigError("/example", "index-set needs example2 or example3");
    const auto path = sample_path(TimeGrid(pr.horizon, cfg.steps), Seed{cfg.seed, cfg.index_path});
    const auto sets = assemble(ic, path, cfg.steps);
    Csv csv({"t", "lo1", "hi1", "lo2", "hi2"});
    for (std::size_t l = 0; l < sets.sets.size(); ++l) {
        const Box& b = sets.sets[l];
        csv.add(sets.grid.time(l)).add(b.lo(0)).add(b.hi(0));
        if (b.dim() > 1) csv.add(b.lo(1)).add(b.hi(1));
        else csv.empty().empty();
        csv.end_row();
    }
    return {{{"index_set.csv", csv.text()}}};
}

CommandOutput cmd_convergence(const ExperimentConfig& cfg) {
    const Problem& pr = problem_of(cfg, "convergence");
    ConvergenceSetup s;
    IndexSetConfig ic;
    if (pr.example == Example::ex2) {
        s.example = 2;
        ic = example2_index_config(pr.family.lambda);
    } else if (pr.example == Example::ex3) {
        s.example = 3;
        ic = example3_index_config(pr.family.lambda, pr.market);
    } else {
        throw ConfigError("/example", "convergence needs example2 or example3");
    }
    s.lambda = pr.family.lambda;
    s.market = pr.market;
    s.t = cfg.conv_t;
    s.K_list = cfg.conv_K;
    s.K_ref = cfg.conv_K_ref;
    s.n_paths = cfg.conv_paths;
    s.seed = cfg.seed;
    s.threads = cfg.threads;
    for (std::size_t k = 0; k < s.K_list.size(); ++k)
        if (s.K_ref % s.K_list[k] != 0)
            throw ConfigError("/convergence/K_list/" + std::to_string(k), "must divide K_ref");
    Csv csv({"K", "mean_dh", "stderr", "n_paths", "seed"});
    for (const auto& r : convergence_study(ic, s)) {
        csv.add(r.K).add(r.mean_dh).add(r.stderr).add(r.n_paths).add(std::to_string(r.seed));
        csv.end_row();
    }
    return {{{"convergence.csv", csv.text()}}};
}

CommandOutput cmd_solve(const ExperimentConfig& cfg) {
    const Problem& pr = problem_of(cfg, "solve");
    const auto sc = scenarios_of(cfg);
    const auto grid = weight_grid(pr, cfg.weight_count);
    const std::size_t store = std::min(cfg.store_paths, sc.n_paths);
    const auto set = sweep(pr, grid, sc, solve_options(cfg, store));

    Csv paths({"weight_id", "path_id", "t", "xi", "C", "c1", "c2", "XT"});
    auto wc = weight_columns(pr);
    std::vector<std::string> scols{"weight_id", wc[0], wc[1], "eta", "budget_residual", "budget_stderr", "quotient_min",
                                   "quotient_max", "quotient_violations", "eta_mc_stderr", "eta_quadrature",
                                   "eta_quadrature_err", "sigma_violation_fraction"};
    Csv summary(scols);
    json sel = json::array();
    double worst = 0.0;
    std::size_t violations = 0;
    const std::size_t stride = sc.stride();
    for (std::size_t k = 0; k < set.selectors.size(); ++k) {
        const auto& s = set.selectors[k];
        const auto& d = s.diag;
        for (std::size_t i = 0; i < store; ++i) {
            const auto xi = sc.xi_row(i);
            const double XT = s.x_terminal.empty() ? 0.0 : s.x_terminal[i];
            for (std::size_t l = 0; l < stride; ++l) {
                const std::size_t idx = i * stride + l;
                paths.add(k).add(i).add(sc.grid.time(l)).add(xi[l]).add(s.C[idx]).add(s.c1[idx]).add(s.c2[idx]).add(XT);
                paths.end_row();
            }
        }
        summary.add(k);
        add_weight(summary, pr, grid[k], k, grid.size());
        summary.add(s.eta).add(d.budget_residual).add(d.budget_stderr).add(d.quotient_min).add(d.quotient_max)
            .add(d.quotient_violations).add(d.eta_mc_stderr).add(d.eta_quadrature).add(d.eta_quadrature_err)
            .add(d.sigma_violation_fraction);
        summary.end_row();
        worst = std::max(worst, std::abs(d.budget_residual));
        violations += d.quotient_violations;
        sel.push_back({{"weight_id", k},
                       {"eta", num(s.eta)},
                       {"budget_residual", num(d.budget_residual)},
                       {"budget_stderr", num(d.budget_stderr)},
                       {"quotient_min", num(d.quotient_min)},
                       {"quotient_max", num(d.quotient_max)},
                       {"quotient_violations", d.quotient_violations},
                       {"eta_quadrature", num(d.eta_quadrature)},
                       {"sigma_violation_fraction", num(d.sigma_violation_fraction)}});
    }
    json j = {{"command", "solve"},
              {"example", to_string(pr.example)},
              {"grid", set.grid_description},
              {"seed", cfg.seed},
              {"paths", cfg.paths},
              {"steps", cfg.steps},
              {"weights", grid.size()},
              {"max_abs_budget_residual", worst},
              {"budget_within_tolerance", worst < 0.005},
              {"quotient_violations", violations},
              {"selectors", sel}};
    // run-environment settings do not belong in the reproducible record
    j["config"] = to_json(cfg);
    j["config"].erase("threads");
    j["config"].erase("out");
    return {{{"solution.csv", paths.text()}, {"summary.csv", summary.text()}, {"summary.json", j.dump(2) + "\n"}}};
}

CommandOutput cmd_portfolio(const ExperimentConfig& cfg) {
    const Problem& pr = problem_of(cfg, "portfolio");
    const auto sc = scenarios_of(cfg);
    const auto grid = weight_grid(pr, cfg.weight_count);
    ConditionalEstimator est = cfg.estimator;
    est.seed = cfg.seed;
    if (est.method == ConditionalEstimator::Method::analytic_density && pr.example != Example::ex2)
        throw ConfigError("/portfolio/estimator", "analytic_density is only available for example2");
    const std::size_t n = std::min(cfg.portfolio_paths, sc.n_paths);

    Csv pcsv({"t", "path_id", "weight_id", "pi_total", "pi_theta", "pi_H", "pi_P", "pi_indec"});
    Csv rcsv({"weight_id", "path_id", "XT", "target", "residual"});
    for (std::size_t k : spread(grid.size(), cfg.portfolio_weights)) {
        const auto sel = solve(pr, grid[k], sc, solve_options(cfg, 0));
        const auto pf = portfolio_paths(pr, sel, sc, n, est, cfg.threads);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < pf.stride; ++l) {
                const std::size_t idx = i * pf.stride + l;
                pcsv.add(sc.grid.time(l)).add(i).add(k).add(pf.pi[idx]).add(pf.theta[idx]).add(pf.hedge_H[idx])
                    .add(pf.hedge_P[idx]).add(pf.indec[idx]);
                pcsv.end_row();
            }
            const auto r = replicate(pr, sel, pf, sc, i);
            rcsv.add(k).add(i).add(r.x_terminal).add(r.target).add(r.x_terminal - r.target);
            rcsv.end_row();
        }
    }
    return {{{"portfolio.csv", pcsv.text()}, {"replication.csv", rcsv.text()}}};
}

CommandOutput run_command(const std::string& verb, const ExperimentConfig& cfg) {
    if (verb == "frontier") return cmd_frontier(cfg);
    if (verb == "index-set") return cmd_index_set(cfg);
    if (verb == "solve") return cmd_solve(cfg);
    if (verb == "portfolio") return cmd_portfolio(cfg);
    if (verb == "convergence") return cmd_convergence(cfg);
    throw ConfigError("", "unknown command '" + verb + "'");
}

std::vector<std::string> write_output(const ExperimentConfig& cfg, const CommandOutput& out) {
    std::vector<std::string> written;
    for (const auto& [name, content] : out.files) {
        const auto path = (std::filesystem::path(cfg.out) / name).string();
        write_atomic(path, content);
        written.push_back(path);
    }
    return written;
}

}  // namespace incpref
