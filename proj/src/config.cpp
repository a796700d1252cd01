#include "incpref/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>

namespace incpref {

using nlohmann::json;

ConfigError::ConfigError(std::string k, const std::string& what)
    : std::runtime_error(k.empty() ? what : k + ": " + what), key(std::move(k)) {}

namespace {

const double kInf = std::numeric_limits<double>::infinity();

const char* type_name(const json& v) {
    if (v.is_number()) return "number";
    return v.type_name();
}

// Walks one JSON object, remembering which keys were read.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object, got " + std::string(type_name(obj_)));
    }

    std::string key(const std::string& k) const { return path_ + "/" + k; }

    const json* find(const std::string& k) {
        auto it = obj_.find(k);
        if (it == obj_.end()) return nullptr;
        seen_.insert(k);
        return &*it;
    }

    void number(const std::string& k, double& out, const std::function<bool(double)>& ok = {}, const char* rule = "") {
        const json* v = find(k);
        if (!v) return;
        if (!v->is_number()) throw ConfigError(key(k), std::string("expected a number, got ") + type_name(*v));
        const double x = v->get<double>();
        if (!std::isfinite(x) || (ok && !ok(x))) throw ConfigError(key(k), std::string("value must be ") + rule);
        out = x;
    }

    void count(const std::string& k, std::size_t& out, std::size_t min = 1) {
        const json* v = find(k);
        if (!v) return;
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
            throw ConfigError(key(k), std::string("expected a nonnegative integer, got ") + type_name(*v));
        const auto x = v->get<std::uint64_t>();
        if (x < min) throw ConfigError(key(k), "value must be at least " + std::to_string(min));
        out = static_cast<std::size_t>(x);
    }

    void u64(const std::string& k, std::uint64_t& out) {
        const json* v = find(k);
        if (!v) return;
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
            throw ConfigError(key(k), std::string("expected a nonnegative integer, got ") + type_name(*v));
        out = v->get<std::uint64_t>();
    }

    void boolean(const std::string& k, bool& out) {
        const json* v = find(k);
        if (!v) return;
        if (!v->is_boolean()) throw ConfigError(key(k), std::string("expected a boolean, got ") + type_name(*v));
        out = v->get<bool>();
    }

    void string(const std::string& k, std::string& out) {
        const json* v = find(k);
        if (!v) return;
        if (!v->is_string()) throw ConfigError(key(k), std::string("expected a string, got ") + type_name(*v));
        out = v->get<std::string>();
    }

    void object(const std::string& k, const std::function<void(Reader&)>& body) {
        const json* v = find(k);
        if (!v) return;
        Reader sub(*v, key(k));
        body(sub);
        sub.finish();
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

bool positive(double x) { return x > 0.0; }
bool nonnegative(double x) { return x >= 0.0; }

void read_fn(Reader& r, const std::string& k, ParamFn& fn) {
    r.object(k, [&](Reader& s) {
        s.number("scale", fn.scale, nonnegative, "nonnegative");
        s.number("offset", fn.offset);
        const json* cap = s.find("cap");
        if (cap) {
            if (cap->is_string() && cap->get<std::string>() == "inf") fn.cap = kInf;
            else if (cap->is_number()) fn.cap = cap->get<double>();
            else throw ConfigError(s.key("cap"), "expected a number or \"inf\"");
        }
    });
}

json fn_json(const ParamFn& f) {
    return {{"scale", f.scale}, {"cap", std::isinf(f.cap) ? json("inf") : json(f.cap)}, {"offset", f.offset}};
}

std::vector<double> read_vector(const json& v, const std::string& path, bool allow_inf) {
    if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const auto& e = v[k];
        if (allow_inf && e.is_string() && e.get<std::string>() == "inf") out.push_back(kInf);
        else if (e.is_number()) out.push_back(e.get<double>());
        else throw ConfigError(path + "/" + std::to_string(k), "expected a number");
    }
    return out;
}

std::string to_string(ConditionalEstimator::Method m) {
    return m == ConditionalEstimator::Method::nested_mc ? "nested_mc" : "analytic_density";
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"example1_case1", "example1_case2", "example1_case3", "example2", "example3", "frontier_default"};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.preset = name;
    cfg.frontier.p_list = {0.5, 1.0, 2.0, 5.0, kInf};
    if (name == "frontier_default") {
        cfg.has_problem = false;
        return cfg;
    }
    try {
        cfg.problem = default_problem(example_from_string(name));
    } catch (const std::invalid_argument&) {
        throw ConfigError("/preset", "unknown preset '" + name + "'");
    }
    return cfg;
}

ExperimentConfig parse_config(const json& doc, const std::string& base) {
    if (!doc.is_object()) throw ConfigError("/", "expected an object");
    std::string name = base;
    if (doc.contains("preset")) {
        if (!doc["preset"].is_string()) throw ConfigError("/preset", "expected a string");
        name = doc["preset"].get<std::string>();
    }
    if (name.empty() && doc.contains("example")) {
        if (!doc["example"].is_string()) throw ConfigError("/example", "expected a string");
        name = doc["example"].get<std::string>();
    }
    if (name.empty()) throw ConfigError("/preset", "no preset or example given");
    ExperimentConfig cfg = preset(name);
    Problem& pr = cfg.problem;

    Reader r(doc, "");
    std::string preset_key;
    r.string("preset", preset_key);
    if (const json* e = r.find("example")) {
        if (!e->is_string()) throw ConfigError("/example", "expected a string");
        try {
            const Example ex = example_from_string(e->get<std::string>());
            if (!cfg.has_problem || ex != pr.example) {
                cfg.problem = default_problem(ex);
                cfg.has_problem = true;
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("/example", "unknown example '" + e->get<std::string>() + "'");
        }
    }
    r.number("horizon", pr.horizon, positive, "positive");
    r.number("x0", pr.x0, positive, "positive");
    r.object("market", [&](Reader& m) {
        m.number("r", pr.market.r);
        m.number("mu", pr.market.mu);
        m.number("sigma0", pr.market.sigma0, positive, "positive");
        m.number("kappa", pr.market.kappa, nonnegative, "nonnegative");
        m.number("varsigma", pr.market.varsigma);
        std::string vm;
        m.string("vol_model", vm);
        if (vm == "constant") pr.market.vol_model = VolModel::constant;
        else if (vm == "exp_ou") pr.market.vol_model = VolModel::exp_ou;
        else if (!vm.empty()) throw ConfigError("/market/vol_model", "expected \"constant\" or \"exp_ou\"");
    });
    r.object("family", [&](Reader& f) {
        auto& fam = pr.family;
        f.number("p", fam.p, positive, "positive");
        f.number("chi", fam.chi, nonnegative, "nonnegative");
        f.number("kappa1", fam.kappa1, nonnegative, "nonnegative");
        f.number("kappa2", fam.kappa2, nonnegative, "nonnegative");
        f.number("beta", fam.beta);
        f.number("lambda", fam.lambda, nonnegative, "nonnegative");
        f.number("p_circ", fam.p_circ, positive, "positive");
        read_fn(f, "chi_fn", fam.chi_fn);
        read_fn(f, "p_fn", fam.p_fn);
    });
    r.object("weights", [&](Reader& w) {
        w.count("count", cfg.weight_count);
        w.number("epsilon", pr.epsilon, positive, "positive");
        w.number("i1_max", pr.i1_max, positive, "positive");
        w.count("i1_cells", pr.i1_cells);
    });
    r.object("grid", [&](Reader& g) { g.count("steps", cfg.steps); });
    r.object("mc", [&](Reader& m) {
        m.count("paths", cfg.paths);
        m.u64("seed", cfg.seed);
        m.count("fine_factor", cfg.fine_factor);
    });
    r.object("solve", [&](Reader& s) {
        s.count("store_paths", cfg.store_paths, 0);
        s.boolean("quadrature", cfg.quadrature);
    });
    r.object("portfolio", [&](Reader& p) {
        p.count("weights", cfg.portfolio_weights);
        p.count("paths", cfg.portfolio_paths);
        p.count("inner_samples", cfg.estimator.inner_samples);
        std::string m;
        p.string("estimator", m);
        if (m == "nested_mc") cfg.estimator.method = ConditionalEstimator::Method::nested_mc;
        else if (m == "analytic_density") cfg.estimator.method = ConditionalEstimator::Method::analytic_density;
        else if (!m.empty()) throw ConfigError("/portfolio/estimator", "expected \"nested_mc\" or \"analytic_density\"");
    });
    r.object("index_set", [&](Reader& s) { s.count("path", cfg.index_path, 0); });
    r.object("convergence", [&](Reader& c) {
        if (const json* v = c.find("K_list")) {
            const auto ks = read_vector(*v, "/convergence/K_list", false);
            cfg.conv_K.clear();
            for (std::size_t k = 0; k < ks.size(); ++k) {
                if (!(ks[k] >= 1.0) || ks[k] != std::floor(ks[k]))
                    throw ConfigError("/convergence/K_list/" + std::to_string(k), "expected a positive integer");
                cfg.conv_K.push_back(static_cast<std::size_t>(ks[k]));
            }
        }
        c.count("K_ref", cfg.conv_K_ref);
        c.count("paths", cfg.conv_paths, 2);
        c.number("t", cfg.conv_t, positive, "positive");
    });
    r.object("frontier", [&](Reader& f) {
        if (const json* v = f.find("mu")) cfg.frontier.mu = read_vector(*v, "/frontier/mu", false);
        if (const json* v = f.find("cov")) {
            if (!v->is_array()) throw ConfigError("/frontier/cov", "expected an array of rows");
            cfg.frontier.cov.clear();
            for (std::size_t k = 0; k < v->size(); ++k)
                cfg.frontier.cov.push_back(read_vector((*v)[k], "/frontier/cov/" + std::to_string(k), false));
        }
        if (const json* v = f.find("p_list")) {
            cfg.frontier.p_list = read_vector(*v, "/frontier/p_list", true);
            for (std::size_t k = 0; k < cfg.frontier.p_list.size(); ++k)
                if (!(cfg.frontier.p_list[k] > 0.0))
                    throw ConfigError("/frontier/p_list/" + std::to_string(k), "value must be positive");
        }
    });
    std::size_t threads = static_cast<std::size_t>(cfg.threads);
    r.count("threads", threads);
    cfg.threads = static_cast<int>(threads);
    r.string("out", cfg.out);
    r.finish();

    const std::size_t n = cfg.frontier.mu.size();
    if (cfg.frontier.cov.size() != n) throw ConfigError("/frontier/cov", "must have one row per mean entry");
    for (std::size_t k = 0; k < n; ++k)
        if (cfg.frontier.cov[k].size() != n) throw ConfigError("/frontier/cov/" + std::to_string(k), "row has the wrong length");
    if (cfg.has_problem) {
        try {
            pr.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("", e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::string& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON in '") + path + "': " + e.what());
    }
    return parse_config(doc, base);
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["preset"] = cfg.preset;
    if (cfg.has_problem) {
        const Problem& pr = cfg.problem;
        j["example"] = to_string(pr.example);
        j["horizon"] = pr.horizon;
        j["x0"] = pr.x0;
        j["market"] = {{"r", pr.market.r},
                       {"mu", pr.market.mu},
                       {"sigma0", pr.market.sigma0},
                       {"kappa", pr.market.kappa},
                       {"varsigma", pr.market.varsigma},
                       {"vol_model", pr.market.vol_model == VolModel::exp_ou ? "exp_ou" : "constant"}};
        const auto& f = pr.family;
        j["family"] = {{"p", f.p},           {"chi", f.chi},     {"kappa1", f.kappa1},
                       {"kappa2", f.kappa2}, {"beta", f.beta},   {"lambda", f.lambda},
                       {"p_circ", f.p_circ}, {"chi_fn", fn_json(f.chi_fn)}, {"p_fn", fn_json(f.p_fn)}};
        j["weights"] = {{"count", cfg.weight_count}, {"epsilon", pr.epsilon}, {"i1_max", pr.i1_max}, {"i1_cells", pr.i1_cells}};
    }
    j["grid"] = {{"steps", cfg.steps}};
    j["mc"] = {{"paths", cfg.paths}, {"seed", cfg.seed}, {"fine_factor", cfg.fine_factor}};
    j["solve"] = {{"store_paths", cfg.store_paths}, {"quadrature", cfg.quadrature}};
    j["portfolio"] = {{"weights", cfg.portfolio_weights},
                      {"paths", cfg.portfolio_paths},
                      {"inner_samples", cfg.estimator.inner_samples},
                      {"estimator", to_string(cfg.estimator.method)}};
    j["index_set"] = {{"path", cfg.index_path}};
    j["convergence"] = {{"K_list", cfg.conv_K}, {"K_ref", cfg.conv_K_ref}, {"paths", cfg.conv_paths}, {"t", cfg.conv_t}};
    json pl = json::array();
    for (double p : cfg.frontier.p_list) pl.push_back(std::isinf(p) ? json("inf") : json(p));
    j["frontier"] = {{"mu", cfg.frontier.mu}, {"cov", cfg.frontier.cov}, {"p_list", pl}};
    j["threads"] = cfg.threads;
    j["out"] = cfg.out;
    return j;
}

}  // namespace incpref
