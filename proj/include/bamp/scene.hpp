#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "priors.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace bamp {

// Unit-modulus phase configuration of the reflecting surface, drawn from a
// 2^bits-point grid on the unit circle.
struct RisConfig {
    Eigen::Index n_elements = 0;
    unsigned bits = 1;
    Eigen::VectorXcd phases;
};

struct SceneDims {
    Eigen::Index m_bs = 0;     // BS antennas (M)
    Eigen::Index k_users = 0;  // users (K)
    Eigen::Index n_ris = 0;    // RIS elements (N)
    Eigen::Index t_slots = 0;  // time slots (T)
    Eigen::Index t_pilot = 0;  // known leading columns of X (T_p)
    Eigen::Index k_anchor = 0; // known leading rows of H^r (K_p)

    void validate() const {
        if (m_bs < 1 || k_users < 1 || n_ris < 1 || t_slots < 1)
            throw invalid_parameter("scene dims: all of M,K,N,T must be >= 1");
        if (t_pilot < 0 || t_pilot > t_slots)
            throw invalid_parameter("scene dims: requires 0 <= t_pilot <= t_slots");
        if (k_anchor < 0 || k_anchor > k_users)
            throw invalid_parameter("scene dims: requires 0 <= k_anchor <= k_users");
    }
};

struct Priors {
    PriorSpec x_prior = GaussianPrior{{0.0, 0.0}, 1.0};
    BernoulliGaussianPrior h_b_prior{0.2, 1.0 / 0.2};
    BernoulliGaussianPrior q_prior{0.2, 1.0 / 0.2};
};

// Ground-truth system realization in beam domain.
struct Scene {
    SceneDims dims;
    RisConfig ris;
    Priors priors;
    CMat h_b;  // [N x M]
    CMat h_r;  // [K x N]
    CMat q;    // [K x N] = h_r * diag(phases)
    CMat x;    // [M x T]
    CMat u;    // [N x T] = h_b * x
    CMat y;    // [K x T]
    double noise_var = 0.0;
    double snr_db = 0.0;
    std::uint64_t seed = 0;

    CMat pilot_block() const { return x.leftCols(dims.t_pilot); }
    CMat anchor_rows() const { return h_r.topRows(dims.k_anchor); }
};

// n x n unitary DFT, entry (a,b) = exp(-2*pi*i*a*b/n)/sqrt(n).
inline CMat dft_matrix(Eigen::Index n) {
    if (n < 1) throw invalid_dimension("dft_matrix: n must be >= 1");
    CMat f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(a * b) / n;
            f(a, b) = scale * cxd{std::cos(ang), std::sin(ang)};
        }
    return f;
}

// I.i.d. Bernoulli-Gaussian matrix: zero w.p. 1-sparsity, else CN(0, slab_var).
inline CMat sample_sparse_channel(Eigen::Index rows, Eigen::Index cols, double sparsity,
                                  double slab_var, std::uint64_t rng_seed) {
    if (sparsity <= 0.0 || sparsity > 1.0)
        throw invalid_parameter("sample_sparse_channel: sparsity outside (0,1]");
    if (slab_var <= 0.0) throw invalid_parameter("sample_sparse_channel: slab_var <= 0");
    Rng rng(rng_seed);
    CMat h = CMat::Zero(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double u = rng.uniform();
            const cxd g = rng.cnormal(slab_var);  // drawn unconditionally for reproducibility
            if (u < sparsity) h(i, j) = g;
        }
    return h;
}

inline RisConfig build_ris_phases(Eigen::Index n, unsigned bits, std::uint64_t rng_seed) {
    if (bits < 1) throw invalid_parameter("build_ris_phases: bits must be >= 1");
    if (n < 1) throw invalid_parameter("build_ris_phases: n must be >= 1");
    Rng rng(rng_seed);
    const std::uint64_t levels = std::uint64_t{1} << bits;
    RisConfig cfg;
    cfg.n_elements = n;
    cfg.bits = bits;
    cfg.phases.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto j = static_cast<double>(rng.next_u64() % levels);
        const double ang = 2.0 * std::numbers::pi * j / static_cast<double>(levels);
        cfg.phases(i) = cxd{std::cos(ang), std::sin(ang)};
    }
    return cfg;
}

// Pilot block: first m rows of the t_pilot-point DFT scaled to unit entry
// modulus, so rows are orthogonal with norm sqrt(t_pilot). Data columns are
// i.i.d. draws from x_prior.
inline CMat design_signal(Eigen::Index m, Eigen::Index t, Eigen::Index t_pilot,
                          const PriorSpec& x_prior, std::uint64_t rng_seed) {
    if (t_pilot > t) throw invalid_parameter("design_signal: t_pilot > t");
    if (m < 1 || t < 1) throw invalid_parameter("design_signal: m and t must be >= 1");
    validate(x_prior);
    CMat x(m, t);
    if (t_pilot > 0) {
        const Eigen::Index np = std::max(m, t_pilot);
        const CMat f = dft_matrix(np);
        x.leftCols(t_pilot) =
            f.topRows(m).leftCols(t_pilot) * std::sqrt(static_cast<double>(np));
    }
    Rng rng(rng_seed);
    for (Eigen::Index j = t_pilot; j < t; ++j)
        for (Eigen::Index i = 0; i < m; ++i) {
            if (const auto* g = std::get_if<GaussianPrior>(&x_prior)) {
                x(i, j) = g->mean + rng.cnormal(g->var);
            } else if (const auto* bg = std::get_if<BernoulliGaussianPrior>(&x_prior)) {
                const double u = rng.uniform();
                const cxd draw = rng.cnormal(bg->slab_var);
                x(i, j) = (u < bg->rho) ? draw : cxd{0.0, 0.0};
            } else {
                const auto& mix = std::get<MixturePrior>(x_prior);
                double wsum = 0.0;
                for (double w : mix.weights) wsum += w;
                double u = rng.uniform() * wsum;
                std::size_t comp = 0;
                for (; comp + 1 < mix.weights.size(); ++comp) {
                    if (u < mix.weights[comp]) break;
                    u -= mix.weights[comp];
                }
                x(i, j) = mix.means[comp] + rng.cnormal(mix.vars[comp]);
            }
        }
    return x;
}

// Full synthetic realization; noise_var is calibrated against the realized
// signal power so that 10*log10(||QU||^2 / E||W||^2) = snr_db.
inline Scene make_scene(const SceneDims& dims, const Priors& priors, const RisConfig& ris,
                        double snr_db, std::uint64_t rng_seed) {
    dims.validate();
    if (ris.n_elements != dims.n_ris)
        throw invalid_dimension("make_scene: RIS element count does not match n_ris");
    Scene sc;
    sc.dims = dims;
    sc.ris = ris;
    sc.priors = priors;
    sc.snr_db = snr_db;
    sc.seed = rng_seed;

    sc.h_b = sample_sparse_channel(dims.n_ris, dims.m_bs, priors.h_b_prior.rho,
                                   priors.h_b_prior.slab_var, rng_seed * 6364136223846793005ULL + 1);
    sc.h_r = sample_sparse_channel(dims.k_users, dims.n_ris, priors.q_prior.rho,
                                   priors.q_prior.slab_var, rng_seed * 6364136223846793005ULL + 2);
    sc.q = sc.h_r * ris.phases.asDiagonal();
    sc.x = design_signal(dims.m_bs, dims.t_slots, dims.t_pilot, priors.x_prior,
                         rng_seed * 6364136223846793005ULL + 3);
    sc.u = sc.h_b * sc.x;

    const CMat qu = sc.q * sc.u;
    const double sig_power = qu.squaredNorm();
    if (std::isinf(snr_db)) {
        sc.noise_var = 0.0;
        sc.y = qu;
    } else {
        const double n_entries = static_cast<double>(qu.size());
        sc.noise_var = (sig_power / n_entries) * std::pow(10.0, -snr_db / 10.0);
        Rng rng(rng_seed * 6364136223846793005ULL + 4);
        sc.y = qu + rng.cnormal_matrix(qu.rows(), qu.cols(), sc.noise_var);
    }
    return sc;
}

}  // namespace bamp
