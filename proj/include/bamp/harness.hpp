#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <cstdlib>

#include "baseline.hpp"
#include "inference.hpp"
#include "scene.hpp"
#include "scene_io.hpp"
#include "types.hpp"

namespace bamp {

// 10*log10(||truth - estimate||^2 / ||truth||^2), clamped at -200 dB.
inline double nmse_db(const CMat& estimate, const CMat& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw invalid_dimension("nmse_db: shape mismatch");
    const double t2 = truth.squaredNorm();
    if (t2 <= 0.0) throw invalid_parameter("nmse_db: zero truth");
    const double e2 = (truth - estimate).squaredNorm();
    if (e2 <= 0.0) return -200.0;
    return std::max(10.0 * std::log10(e2 / t2), -200.0);
}

struct Estimates {
    CMat x_hat;
    CMat h_b_hat;
    CMat h_r_hat;
};

// Resolves the residual diagonal scaling ambiguity of the factor pairs by a
// least-squares fit of the estimate's anchor rows/columns against the known
// anchors. Identity when the estimates already honor the delta priors.
inline Estimates align_estimates(const Estimates& est, const CMat& pilots,
                                 const CMat& h_r_anchor_rows, int* skipped = nullptr) {
    if (pilots.cols() == 0 && h_r_anchor_rows.rows() == 0)
        throw invalid_parameter("align_estimates: needs at least one pilot column or anchor row");
    Estimates out = est;
    int skip = 0;
    // Layer-1 couple (H^b C, C^-1 X): per-row scale of X from pilot columns.
    if (pilots.cols() > 0) {
        for (Eigen::Index m = 0; m < est.x_hat.rows(); ++m) {
            const auto est_row = est.x_hat.row(m).leftCols(pilots.cols());
            const double denom = est_row.squaredNorm();
            if (denom <= 0.0) {
                ++skip;
                continue;
            }
            const cxd c = (est_row.conjugate().cwiseProduct(pilots.row(m))).sum() / denom;
            if (std::abs(c) <= 0.0) {
                ++skip;
                continue;
            }
            out.x_hat.row(m) = c * est.x_hat.row(m);
            out.h_b_hat.col(m) = est.h_b_hat.col(m) / c;
        }
    }
    // Layer-2 couple (Q D, D^-1 U): per-column scale of H^r from anchor rows.
    if (h_r_anchor_rows.rows() > 0) {
        const Eigen::Index kp = h_r_anchor_rows.rows();
        for (Eigen::Index n = 0; n < est.h_r_hat.cols(); ++n) {
            const auto est_col = est.h_r_hat.col(n).topRows(kp);
            const double denom = est_col.squaredNorm();
            if (denom <= 0.0) {
                ++skip;
                continue;
            }
            const cxd d = (est_col.conjugate().cwiseProduct(h_r_anchor_rows.col(n))).sum() / denom;
            if (std::abs(d) <= 0.0) {
                ++skip;
                continue;
            }
            out.h_r_hat.col(n) = d * est.h_r_hat.col(n);
            // the same diagonal appears inverted on U = H^b X, i.e. on the
            // matching row of H^b; undo it on top of the layer-1 correction
            out.h_b_hat.row(n) /= d;
        }
    }
    if (skipped) *skipped = skip;
    return out;
}

enum class Algorithm { bamp, bigamp_ls };

inline std::string to_string(Algorithm a) {
    return a == Algorithm::bamp ? "bamp" : "bigamp_ls";
}

struct Variant {
    std::string label;  // empty for single-variant specs
    SceneDims dims;
};

struct ExperimentSpec {
    std::vector<Variant> variants;  // at least one
    std::vector<double> snr_grid_db;
    int trials = 1;
    std::uint64_t base_seed = 1;
    std::vector<Algorithm> algorithms{Algorithm::bamp, Algorithm::bigamp_ls};
    BampConfig config;
    Priors priors;
    unsigned ris_bits = 2;
    bool average_linear = false;  // average linear MSE before the log instead of dB
    double divergence_threshold = 1e3;

    void validate() const {
        if (variants.empty()) throw invalid_parameter("ExperimentSpec: no variants");
        for (const auto& v : variants) v.dims.validate();
        if (snr_grid_db.empty()) throw invalid_parameter("ExperimentSpec: empty snr_grid");
        if (trials < 1) throw invalid_parameter("ExperimentSpec: trials must be >= 1");
        if (algorithms.empty()) throw invalid_parameter("ExperimentSpec: no algorithms");
        config.validate();
    }
};

struct ResultRow {
    double snr_db = 0.0;
    std::string algorithm;  // algorithm name, suffixed ":<label>" for variants
    std::string variable;   // "X", "Hb", "Hr"
    double nmse_db_mean = 0.0;
    double nmse_db_std = 0.0;
    int trials_used = 0;
    int divergent = 0;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    const ResultRow* find(double snr, const std::string& algo, const std::string& var) const {
        for (const auto& r : rows)
            if (r.snr_db == snr && r.algorithm == algo && r.variable == var) return &r;
        return nullptr;
    }
};

inline void write_csv(const ResultTable& table, std::ostream& os, bool complete = true) {
    os << "snr_db,algorithm,variable,nmse_db_mean,nmse_db_std,trials,divergent\n";
    for (const auto& r : table.rows)
        os << r.snr_db << ',' << r.algorithm << ',' << r.variable << ',' << r.nmse_db_mean << ','
           << r.nmse_db_std << ',' << r.trials_used << ',' << r.divergent << '\n';
    if (!complete) os << "# incomplete\n";
}

inline ResultTable read_csv(std::istream& is) {
    ResultTable t;
    std::string line;
    if (!std::getline(is, line) ||
        line != "snr_db,algorithm,variable,nmse_db_mean,nmse_db_std,trials,divergent")
        throw io_error("result CSV: bad header");
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string field;
        ResultRow r;
        std::getline(ss, field, ',');
        r.snr_db = std::stod(field);
        std::getline(ss, r.algorithm, ',');
        std::getline(ss, r.variable, ',');
        std::getline(ss, field, ',');
        r.nmse_db_mean = std::stod(field);
        std::getline(ss, field, ',');
        r.nmse_db_std = std::stod(field);
        std::getline(ss, field, ',');
        r.trials_used = std::stoi(field);
        std::getline(ss, field, ',');
        r.divergent = std::stoi(field);
        t.rows.push_back(r);
    }
    return t;
}

namespace detail {

struct TrialOutcome {
    bool divergent = false;
    double nmse_x = 0.0, nmse_hb = 0.0, nmse_hr = 0.0;  // dB
};

inline int harness_thread_count() {
    if (const char* env = std::getenv("BAMP_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

inline TrialOutcome evaluate_trial(const Scene& scene, Algorithm algo, const BampConfig& config,
                                   double divergence_threshold) {
    TrialOutcome out;
    try {
        Estimates est;
        double residual = 0.0;
        if (algo == Algorithm::bamp) {
            const RunReport rep = run_bamp(scene, config);
            est = {rep.x_hat, rep.h_b_hat, rep.h_r_hat};
            residual = rep.per_iteration.empty() ? 0.0 : rep.per_iteration.back().residual;
        } else {
            const BaselineReport rep = run_baseline(scene, config);
            est = {baseline_x_hat(scene, rep), rep.h_b_hat, rep.h_r_hat};
            residual = rep.stage1_residual.empty() ? 0.0 : rep.stage1_residual.back();
        }
        if (!std::isfinite(residual) || residual > divergence_threshold) {
            out.divergent = true;
            return out;
        }
        const Estimates aligned =
            align_estimates(est, scene.pilot_block(), scene.anchor_rows());
        out.nmse_x = nmse_db(aligned.x_hat, scene.x);
        out.nmse_hb = nmse_db(aligned.h_b_hat, scene.h_b);
        out.nmse_hr = nmse_db(aligned.h_r_hat, scene.h_r);
        if (!std::isfinite(out.nmse_x) || !std::isfinite(out.nmse_hb) ||
            !std::isfinite(out.nmse_hr))
            out.divergent = true;
    } catch (const std::exception&) {
        out.divergent = true;  // recorded, not fatal
    }
    return out;
}

inline std::pair<double, double> mean_std(const std::vector<double>& vals, bool linear_domain) {
    if (vals.empty()) return {0.0, 0.0};
    if (linear_domain) {
        double s = 0.0;
        std::vector<double> lin(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) {
            lin[i] = std::pow(10.0, vals[i] / 10.0);
            s += lin[i];
        }
        const double mean_lin = s / static_cast<double>(lin.size());
        double var = 0.0;
        for (double v : lin) var += (v - mean_lin) * (v - mean_lin);
        var /= static_cast<double>(lin.size());
        // std reported in dB around the linear mean
        const double mean_db = 10.0 * std::log10(std::max(mean_lin, 1e-20));
        const double std_db =
            10.0 * std::log10(std::max(mean_lin + std::sqrt(var), 1e-20)) - mean_db;
        return {mean_db, std_db};
    }
    double s = 0.0;
    for (double v : vals) s += v;
    const double mean = s / static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    return {mean, std::sqrt(var)};
}

}  // namespace detail

using ProgressFn = std::function<void(int done, int total)>;

// Monte Carlo sweep. Trials run in parallel (BAMP_THREADS caps the pool) and
// are reduced by trial index, so the table is deterministic for a base_seed.
// The optional stop flag supports interruptible CLI runs.
inline ResultTable run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = nullptr,
                                  const std::atomic<bool>* stop = nullptr,
                                  bool* complete = nullptr) {
    spec.validate();

    struct Job {
        std::size_t variant;
        std::size_t snr;
        int trial;
    };
    std::vector<Job> jobs;
    for (std::size_t v = 0; v < spec.variants.size(); ++v)
        for (std::size_t s = 0; s < spec.snr_grid_db.size(); ++s)
            for (int tr = 0; tr < spec.trials; ++tr) jobs.push_back({v, s, tr});

    // outcome slot per (job, algorithm)
    std::vector<std::vector<detail::TrialOutcome>> outcomes(
        jobs.size(), std::vector<detail::TrialOutcome>(spec.algorithms.size()));
    std::vector<char> done(jobs.size(), 0);

    std::atomic<std::size_t> next{0};
    std::atomic<int> finished{0};
    const int n_threads = std::min<int>(detail::harness_thread_count(),
                                        static_cast<int>(jobs.size()));
    auto worker = [&]() {
        for (;;) {
            if (stop && stop->load()) return;
            const std::size_t idx = next.fetch_add(1);
            if (idx >= jobs.size()) return;
            const Job& job = jobs[idx];
            const auto& variant = spec.variants[job.variant];
            const auto seed = spec.base_seed + static_cast<std::uint64_t>(job.trial) +
                              1000003ULL * static_cast<std::uint64_t>(job.variant);
            const RisConfig ris =
                build_ris_phases(variant.dims.n_ris, spec.ris_bits, seed ^ 0x9e3779b97f4a7c15ULL);
            const Scene scene =
                make_scene(variant.dims, spec.priors, ris, spec.snr_grid_db[job.snr], seed);
            for (std::size_t a = 0; a < spec.algorithms.size(); ++a)
                outcomes[idx][a] = detail::evaluate_trial(scene, spec.algorithms[a], spec.config,
                                                          spec.divergence_threshold);
            done[idx] = 1;
            const int f = finished.fetch_add(1) + 1;
            if (progress) progress(f, static_cast<int>(jobs.size()));
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    const bool all_done =
        std::all_of(done.begin(), done.end(), [](char c) { return c != 0; });
    if (complete) *complete = all_done;

    ResultTable table;
    const char* variables[3] = {"X", "Hb", "Hr"};
    for (std::size_t v = 0; v < spec.variants.size(); ++v)
        for (std::size_t s = 0; s < spec.snr_grid_db.size(); ++s)
            for (std::size_t a = 0; a < spec.algorithms.size(); ++a) {
                std::vector<double> per_var[3];
                int divergent = 0;
                for (std::size_t idx = 0; idx < jobs.size(); ++idx) {
                    if (jobs[idx].variant != v || jobs[idx].snr != s || !done[idx]) continue;
                    const auto& o = outcomes[idx][a];
                    if (o.divergent) {
                        ++divergent;
                        continue;
                    }
                    per_var[0].push_back(o.nmse_x);
                    per_var[1].push_back(o.nmse_hb);
                    per_var[2].push_back(o.nmse_hr);
                }
                std::string algo_name = to_string(spec.algorithms[a]);
                if (!spec.variants[v].label.empty()) algo_name += ":" + spec.variants[v].label;
                for (int var = 0; var < 3; ++var) {
                    ResultRow row;
                    row.snr_db = spec.snr_grid_db[s];
                    row.algorithm = algo_name;
                    row.variable = variables[var];
                    const auto [mean, sd] = detail::mean_std(per_var[var], spec.average_linear);
                    row.nmse_db_mean = mean;
                    row.nmse_db_std = sd;
                    row.trials_used = static_cast<int>(per_var[var].size());
                    row.divergent = divergent;
                    table.rows.push_back(row);
                }
            }
    return table;
}

// Experiment presets mirroring the reference NMSE-vs-SNR figures. The desk
// scale divides all dimensions by 5 (ratios T_p/T and K_p/K preserved) and
// runs 50 trials so a full sweep stays in the minutes range.
enum class PresetScale { paper, desk };

inline ExperimentSpec preset(const std::string& name, PresetScale scale) {
    const int div = (scale == PresetScale::desk) ? 5 : 1;
    auto dims = [&](Eigen::Index m, Eigen::Index k, Eigen::Index n, Eigen::Index t,
                    Eigen::Index tp, Eigen::Index kp) {
        SceneDims d;
        d.m_bs = m / div;
        d.k_users = k / div;
        d.n_ris = n / div;
        d.t_slots = t / div;
        d.t_pilot = tp / div;
        d.k_anchor = kp / div;
        return d;
    };
    ExperimentSpec spec;
    // data symbols are a unit-energy 4-point phase constellation; the
    // baseline recovers X by least squares and does not use this prior
    const double a = 1.0 / std::sqrt(2.0);
    spec.priors.x_prior = MixturePrior{{0.25, 0.25, 0.25, 0.25},
                                       {{a, a}, {a, -a}, {-a, a}, {-a, -a}},
                                       {1e-4, 1e-4, 1e-4, 1e-4}};
    spec.priors.h_b_prior = {0.3, 1.0 / 0.3};
    spec.priors.q_prior = {0.3, 1.0 / 0.3};
    spec.snr_grid_db = {0.0, 10.0, 20.0, 30.0};
    spec.trials = (scale == PresetScale::desk) ? 50 : 500;
    spec.config.max_iters = 20;
    spec.config.damping = 0.3;
    if (name == "fig3") {
        spec.variants = {{"", dims(100, 500, 200, 200, 100, 150)}};
    } else if (name == "fig4") {
        spec.variants = {{"tp" + std::to_string(180 / div), dims(100, 500, 100, 600, 180, 150)},
                         {"tp" + std::to_string(200 / div), dims(100, 500, 100, 600, 200, 150)},
                         {"tp" + std::to_string(240 / div), dims(100, 500, 100, 600, 240, 150)}};
        spec.algorithms = {Algorithm::bamp};
        // shorter pilot blocks converge slower; run to the fixed point so the
        // comparison measures the pilot ratio, not iteration truncation
        spec.config.max_iters = 40;
    } else if (name == "fig5") {
        spec.variants = {{"kp" + std::to_string(120 / div), dims(100, 500, 200, 200, 100, 120)},
                         {"kp" + std::to_string(150 / div), dims(100, 500, 200, 200, 100, 150)},
                         {"kp" + std::to_string(180 / div), dims(100, 500, 200, 200, 100, 180)}};
        spec.algorithms = {Algorithm::bamp};
    } else if (name == "fig6") {
        spec.variants = {{"n" + std::to_string(150 / div), dims(100, 500, 150, 200, 100, 150)},
                         {"n" + std::to_string(200 / div), dims(100, 500, 200, 200, 100, 150)},
                         {"n" + std::to_string(300 / div), dims(100, 500, 300, 200, 100, 150)}};
        spec.algorithms = {Algorithm::bamp};
    } else {
        throw invalid_parameter("unknown preset '" + name +
                                "'; valid presets: fig3, fig4, fig5, fig6");
    }
    return spec;
}

inline std::vector<std::string> preset_names() { return {"fig3", "fig4", "fig5", "fig6"}; }

}  // namespace bamp
