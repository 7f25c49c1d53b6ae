#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "harness.hpp"
#include "scene.hpp"
#include "types.hpp"

// Plain key = value config files, one key per line, '#' comments. Every
// field is explicit; missing required keys are a validation error so config
// files are self-contained and diffable.

namespace bamp {

struct config_error : std::runtime_error {
    int line = 0;
    config_error(const std::string& msg, int line_no)
        : std::runtime_error(msg + (line_no > 0 ? " (line " + std::to_string(line_no) + ")" : "")),
          line(line_no) {}
};

class ConfigFile {
  public:
    static ConfigFile parse(std::istream& is) {
        ConfigFile cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw config_error("expected 'key = value', got '" + trimmed + "'", line_no);
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) throw config_error("empty key", line_no);
            cfg.values_[key] = {value, line_no};
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw config_error("cannot open config file " + path, 0);
        return parse(is);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw config_error("missing required key '" + key + "'", 0);
        return it->second.value;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second.value;
    }

    double get_real(const std::string& key) const { return to_real(key, get_string(key)); }
    double get_real(const std::string& key, double fallback) const {
        return has(key) ? get_real(key) : fallback;
    }

    long long get_int(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw config_error("missing required key '" + key + "'", 0);
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw config_error("key '" + key + "': expected integer, got '" + it->second.value +
                                   "'",
                               it->second.line);
        }
    }
    long long get_int(const std::string& key, long long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    std::vector<double> get_real_list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get_string(key));
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(to_real(key, trim(tok)));
        if (out.empty()) throw config_error("key '" + key + "': empty list", 0);
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& key) const {
        std::vector<std::string> out;
        std::stringstream ss(get_string(key));
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
        return out;
    }

  private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, Entry> values_;

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    double to_real(const std::string& key, const std::string& value) const {
        if (value == "inf" || value == "+inf") return std::numeric_limits<double>::infinity();
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw config_error("key '" + key + "': expected number, got '" + value + "'", 0);
        }
    }
};

struct SceneConfig {
    SceneDims dims;
    Priors priors;
    unsigned ris_bits = 2;
    double snr_db = 0.0;
    std::uint64_t seed = 1;
};

inline Priors priors_from_config(const ConfigFile& cfg) {
    Priors p;
    const double rho_b = cfg.get_real("rho_b", 0.2);
    const double rho_q = cfg.get_real("rho_q", 0.2);
    // slab variance 1/rho keeps E||H||^2 at the dense-Gaussian value
    p.h_b_prior = {rho_b, cfg.get_real("slab_var_b", 1.0 / rho_b)};
    p.q_prior = {rho_q, cfg.get_real("slab_var_q", 1.0 / rho_q)};
    const std::string x_kind = cfg.get_string("x_prior", "gaussian");
    if (x_kind == "gaussian") {
        p.x_prior = GaussianPrior{{0.0, 0.0}, cfg.get_real("x_var", 1.0)};
    } else if (x_kind == "mixture") {
        MixturePrior m;
        m.weights = cfg.get_real_list("x_mix_weights");
        m.vars = cfg.get_real_list("x_mix_vars");
        // means are real values, or re/im interleaved when twice as many
        // numbers as weights are given (e.g. a phase constellation)
        const std::vector<double> mm = cfg.get_real_list("x_mix_means");
        if (mm.size() == 2 * m.weights.size()) {
            for (std::size_t i = 0; i + 1 < mm.size(); i += 2)
                m.means.push_back({mm[i], mm[i + 1]});
        } else {
            for (double re : mm) m.means.push_back({re, 0.0});
        }
        p.x_prior = m;
    } else {
        throw config_error("x_prior must be 'gaussian' or 'mixture', got '" + x_kind + "'", 0);
    }
    return p;
}

inline SceneConfig scene_config_from(const ConfigFile& cfg) {
    SceneConfig sc;
    sc.dims.m_bs = cfg.get_int("m");
    sc.dims.k_users = cfg.get_int("k");
    sc.dims.n_ris = cfg.get_int("n");
    sc.dims.t_slots = cfg.get_int("t");
    sc.dims.t_pilot = cfg.get_int("t_pilot");
    sc.dims.k_anchor = cfg.get_int("k_anchor");
    sc.dims.validate();
    sc.priors = priors_from_config(cfg);
    sc.ris_bits = static_cast<unsigned>(cfg.get_int("ris_bits", 2));
    sc.snr_db = cfg.get_real("snr_db");
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    return sc;
}

inline BampConfig bamp_config_from(const ConfigFile& cfg) {
    BampConfig c;
    c.max_iters = static_cast<int>(cfg.get_int("max_iters", c.max_iters));
    c.damping = cfg.get_real("damping", c.damping);
    c.mean_damping = cfg.get_real("mean_damping", c.mean_damping);
    c.var_floor = cfg.get_real("var_floor", c.var_floor);
    c.inner_iters = static_cast<int>(cfg.get_int("inner_iters", c.inner_iters));
    c.stop_tol = cfg.get_real("stop_tol", c.stop_tol);
    c.retain_product_var = cfg.get_int("retain_product_var", 1) != 0;
    c.validate();
    return c;
}

// Experiment spec files carry every ExperimentSpec field explicitly.
inline ExperimentSpec experiment_from_config(const ConfigFile& cfg) {
    ExperimentSpec spec;
    SceneDims d;
    d.m_bs = cfg.get_int("m");
    d.k_users = cfg.get_int("k");
    d.n_ris = cfg.get_int("n");
    d.t_slots = cfg.get_int("t");
    d.t_pilot = cfg.get_int("t_pilot");
    d.k_anchor = cfg.get_int("k_anchor");
    spec.variants = {{"", d}};
    spec.snr_grid_db = cfg.get_real_list("snr_grid");
    spec.trials = static_cast<int>(cfg.get_int("trials"));
    spec.base_seed = static_cast<std::uint64_t>(cfg.get_int("base_seed"));
    spec.algorithms.clear();
    for (const auto& name : cfg.get_string_list("algorithms")) {
        if (name == "bamp")
            spec.algorithms.push_back(Algorithm::bamp);
        else if (name == "bigamp_ls")
            spec.algorithms.push_back(Algorithm::bigamp_ls);
        else
            throw config_error("unknown algorithm '" + name + "'; valid: bamp, bigamp_ls", 0);
    }
    spec.config = bamp_config_from(cfg);
    spec.priors = priors_from_config(cfg);
    spec.ris_bits = static_cast<unsigned>(cfg.get_int("ris_bits", 2));
    spec.average_linear = cfg.get_int("average_linear", 0) != 0;
    spec.validate();
    return spec;
}

}  // namespace bamp
