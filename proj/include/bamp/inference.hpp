#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "priors.hpp"
#include "rng.hpp"
#include "scene.hpp"
#include "types.hpp"

namespace bamp {

// Per-layer product-node state. z_bar/v_bar are the plain product moments,
// z_plant/v_plant include the Onsager correction, s_tilde/v_s are the
// output-node scores with one-iteration memory.
struct LayerState {
    CMat z_bar;
    RMat v_bar;
    CMat z_plant;
    RMat v_plant;
    CMat s_tilde;
    RMat v_s;
    CMat prev_s_tilde;
    RMat prev_v_s;
};

struct BampConfig {
    int max_iters = 20;
    double damping = 0.3;          // beta in (0,1], applied to the score pair
    double mean_damping = 0.5;     // beta for the belief-mean tracks
    double var_floor = 1e-12;
    int inner_iters = 1;
    double stop_tol = 1e-6;
    bool retain_product_var = true;  // keep the v_a*v_b term in V
    std::uint64_t init_seed = 1;     // perturbation seed when a factor init is all-zero

    void validate() const {
        if (max_iters < 1) throw invalid_parameter("BampConfig: max_iters must be >= 1");
        if (damping <= 0.0 || damping > 1.0)
            throw invalid_parameter("BampConfig: damping outside (0,1]");
        if (mean_damping <= 0.0 || mean_damping > 1.0)
            throw invalid_parameter("BampConfig: mean_damping outside (0,1]");
        if (var_floor <= 0.0) throw invalid_parameter("BampConfig: var_floor <= 0");
        if (inner_iters < 1) throw invalid_parameter("BampConfig: inner_iters must be >= 1");
    }
};

struct IterationRecord {
    int iteration = 0;
    double residual = 0.0;  // ||Y - Zbar2||^2 / ||Y||^2
    double nmse_x_db = std::numeric_limits<double>::quiet_NaN();
    double nmse_h_b_db = std::numeric_limits<double>::quiet_NaN();
    double nmse_h_r_db = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t clamp_count = 0;  // v_s / Sigma clamps this iteration
};

struct RunReport {
    CMat x_hat;
    CMat h_b_hat;
    CMat q_hat;
    CMat h_r_hat;
    std::vector<IterationRecord> per_iteration;
    std::optional<int> converged_at;
};

// Optional ground truth for per-iteration NMSE diagnostics.
struct TruthRef {
    const CMat* x = nullptr;
    const CMat* h_b = nullptr;
    const CMat* h_r = nullptr;
};

using TraceSink = std::function<void(const IterationRecord&)>;

struct ScoreResult {
    CMat z_tilde;
    RMat v_tilde;
    CMat s_tilde;
    RMat v_s;
};

namespace detail {

constexpr double kSigmaCap = 1e30;

inline std::uint64_t clamp_vs(RMat& v_s, double var_floor) {
    std::uint64_t clamps = 0;
    for (Eigen::Index j = 0; j < v_s.cols(); ++j)
        for (Eigen::Index i = 0; i < v_s.rows(); ++i)
            if (!(v_s(i, j) > 0.0)) {
                v_s(i, j) = var_floor;
                ++clamps;
            }
    return clamps;
}

}  // namespace detail

// Posterior moments and scores for the AWGN output channel y = z + w,
// w ~ CN(0, noise_var), against the plant Gaussian CN(z; z_plant, v_plant).
inline ScoreResult output_score_awgn(const CMat& z_plant, const RMat& v_plant, const CMat& y,
                                     double noise_var) {
    if (noise_var < 0.0) throw invalid_parameter("output_score_awgn: noise_var < 0");
    require_same_shape(z_plant, v_plant, "output_score_awgn");
    if (y.rows() != z_plant.rows() || y.cols() != z_plant.cols())
        throw invalid_dimension("output_score_awgn: y shape mismatch");
    ScoreResult r;
    const RMat denom = v_plant.array() + noise_var;
    r.z_tilde = z_plant + (v_plant.array() * (y - z_plant).array() / denom.array()).matrix();
    r.v_tilde = (v_plant.array() * noise_var / denom.array()).matrix();
    r.s_tilde = ((r.z_tilde - z_plant).array() / v_plant.array()).matrix();
    r.v_s = (-(r.v_tilde - v_plant).array() / v_plant.array().square()).matrix();
    return r;
}

// Same scores, but the likelihood is the incoming Gaussian message
// CN(u; R, Sigma) from the layer above. Sigma >= kSigmaCap marks a flat
// message and yields zero score.
inline ScoreResult output_score_pseudo(const CMat& z_plant, const RMat& v_plant,
                                       const GaussianField& incoming) {
    require_same_shape(z_plant, v_plant, "output_score_pseudo");
    if (incoming.rows() != z_plant.rows() || incoming.cols() != z_plant.cols())
        throw invalid_dimension("output_score_pseudo: incoming message shape mismatch");
    if (!all_finite(incoming.mean)) throw numeric_error("output_score_pseudo: non-finite R");
    ScoreResult r;
    r.z_tilde.resize(z_plant.rows(), z_plant.cols());
    r.v_tilde.resize(z_plant.rows(), z_plant.cols());
    r.s_tilde.resize(z_plant.rows(), z_plant.cols());
    r.v_s.resize(z_plant.rows(), z_plant.cols());
    for (Eigen::Index j = 0; j < z_plant.cols(); ++j)
        for (Eigen::Index i = 0; i < z_plant.rows(); ++i) {
            const double v = v_plant(i, j);
            const double sig = incoming.var(i, j);
            if (!std::isfinite(sig)) throw numeric_error("output_score_pseudo: non-finite Sigma");
            if (sig >= detail::kSigmaCap) {
                r.z_tilde(i, j) = z_plant(i, j);
                r.v_tilde(i, j) = v;
                r.s_tilde(i, j) = 0.0;
                r.v_s(i, j) = 0.0;
                continue;
            }
            const double denom = v + sig;
            const cxd zt = (sig * z_plant(i, j) + v * incoming.mean(i, j)) / denom;
            const double vt = v * sig / denom;
            r.z_tilde(i, j) = zt;
            r.v_tilde(i, j) = vt;
            r.s_tilde(i, j) = (zt - z_plant(i, j)) / v;
            r.v_s(i, j) = -(vt - v) / (v * v);
        }
    return r;
}

// Product-node moments for Z = A * B with independent entrywise beliefs.
inline LayerState plant_estimates(const GaussianField& a_belief, const GaussianField& b_belief,
                                  const LayerState& prev, bool retain_product_var = true) {
    if (a_belief.cols() != b_belief.rows())
        throw invalid_dimension("plant_estimates: inner dimensions disagree");
    LayerState st;
    st.z_bar = a_belief.mean * b_belief.mean;
    st.v_bar = abs2(a_belief.mean) * b_belief.var + a_belief.var * abs2(b_belief.mean);
    if (prev.s_tilde.size() == st.z_bar.size() && prev.s_tilde.rows() == st.z_bar.rows()) {
        st.z_plant = st.z_bar - prev.s_tilde.cwiseProduct(st.v_bar.cast<cxd>());
    } else {
        st.z_plant = st.z_bar;
    }
    st.v_plant = st.v_bar;
    if (retain_product_var) st.v_plant += a_belief.var * b_belief.var;
    st.prev_s_tilde = prev.s_tilde;
    st.prev_v_s = prev.v_s;
    return st;
}

enum class FactorSide { left, right };  // which factor of A*B is being updated

// Cavity parameters (R, Sigma) for one factor of a bilinear product, from
// the peer factor's belief and the output scores. Standard AMP form:
// Sigma^-1 accumulates |peer|^2 * v_s over the shared index, R recenters
// the current estimate by Sigma * (peer^* s_tilde) and shrinks it by
// 1 - Sigma * (peer_var * v_s) to cancel the self-feedback bias.
inline GaussianField input_update(const GaussianField& peer_belief, const CMat& s_tilde,
                                  const RMat& v_s, const CMat& current_estimate, FactorSide side,
                                  double var_floor, std::uint64_t* clamp_count = nullptr) {
    RMat sigma_inv;
    RMat bias;
    CMat drift;
    if (side == FactorSide::left) {
        // updating A in Z = A*B: shared index is B's columns axis of Z
        sigma_inv = v_s * abs2(peer_belief.mean).transpose();
        bias = v_s * peer_belief.var.transpose();
        drift = s_tilde * peer_belief.mean.adjoint();
    } else {
        sigma_inv = abs2(peer_belief.mean).transpose() * v_s;
        bias = peer_belief.var.transpose() * v_s;
        drift = peer_belief.mean.adjoint() * s_tilde;
    }
    if (sigma_inv.rows() != current_estimate.rows() || sigma_inv.cols() != current_estimate.cols())
        throw invalid_dimension("input_update: estimate shape mismatch");
    GaussianField cav;
    cav.var.resize(sigma_inv.rows(), sigma_inv.cols());
    std::uint64_t clamps = 0;
    for (Eigen::Index j = 0; j < sigma_inv.cols(); ++j)
        for (Eigen::Index i = 0; i < sigma_inv.rows(); ++i) {
            const double si = sigma_inv(i, j);
            if (!(si > 0.0)) {
                cav.var(i, j) = (si == 0.0) ? detail::kSigmaCap : var_floor;
                if (si != 0.0) ++clamps;
            } else {
                cav.var(i, j) = std::min(1.0 / si, detail::kSigmaCap);
            }
        }
    // shrink factor clamped to [0,1]; a capped Sigma would otherwise blow
    // the bias product up during the flat bootstrap iterations
    const RMat shrink =
        (1.0 - (cav.var.array() * bias.array()).min(1.0).max(0.0)).matrix();
    cav.mean = current_estimate.cwiseProduct(shrink.cast<cxd>()) +
               cav.var.cast<cxd>().cwiseProduct(drift);
    if (clamp_count) *clamp_count += clamps;
    return cav;
}

// Gaussian product across a stack of per-entry messages:
// Sigma^-1 = sum_k Sigma_k^-1, R = Sigma * sum_k R_k / Sigma_k.
// Flat factors (Sigma >= kSigmaCap) are absorbed; an all-flat product
// returns the flat sentinel.
inline GaussianField interlayer_message(const std::vector<GaussianField>& factors) {
    if (factors.empty()) throw invalid_parameter("interlayer_message: no factors");
    const Eigen::Index rows = factors.front().rows(), cols = factors.front().cols();
    GaussianField out;
    out.mean = CMat::Zero(rows, cols);
    out.var.resize(rows, cols);
    RMat prec = RMat::Zero(rows, cols);
    CMat weighted = CMat::Zero(rows, cols);
    for (const auto& f : factors) {
        if (f.rows() != rows || f.cols() != cols)
            throw invalid_dimension("interlayer_message: factor shape mismatch");
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double sig = f.var(i, j);
                if (sig >= detail::kSigmaCap) continue;
                prec(i, j) += 1.0 / sig;
                weighted(i, j) += f.mean(i, j) / sig;
            }
    }
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (prec(i, j) > 0.0) {
                out.var(i, j) = 1.0 / prec(i, j);
                out.mean(i, j) = weighted(i, j) / prec(i, j);
            } else {
                out.var(i, j) = detail::kSigmaCap;
                out.mean(i, j) = 0.0;
            }
        }
    return out;
}

template <typename Mat>
inline Mat damp(const Mat& new_value, const Mat& old_value, double beta) {
    if (beta <= 0.0 || beta > 1.0) throw invalid_parameter("damp: beta outside (0,1]");
    return beta * new_value + (1.0 - beta) * old_value;
}

// Known-entry overlays: pilot columns of X and anchor rows of Q enter as
// delta priors (exact mean, floored variance).
namespace detail {

inline void apply_pilot_delta(GaussianField& x_belief, const CMat& pilots, double var_floor) {
    const Eigen::Index tp = pilots.cols();
    if (tp == 0) return;
    x_belief.mean.leftCols(tp) = pilots;
    x_belief.var.leftCols(tp).setConstant(var_floor);
}

inline void apply_anchor_delta(GaussianField& q_belief, const CMat& q_anchor, double var_floor) {
    const Eigen::Index kp = q_anchor.rows();
    if (kp == 0) return;
    q_belief.mean.topRows(kp) = q_anchor;
    q_belief.var.topRows(kp).setConstant(var_floor);
}

inline void check_finite(const GaussianField& f, int iter, const char* name) {
    if (!all_finite(f.mean) || !all_finite(f.var))
        throw numeric_error("run_bamp: non-finite values in " + std::string(name) +
                            " at iteration " + std::to_string(iter));
}

inline double nmse_db_or_nan(const CMat& est, const CMat* truth) {
    if (!truth || truth->size() == 0) return std::numeric_limits<double>::quiet_NaN();
    const double t2 = truth->squaredNorm();
    if (t2 <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double e2 = (*truth - est).squaredNorm();
    if (e2 <= 0.0) return -200.0;
    return std::max(10.0 * std::log10(e2 / t2), -200.0);
}

// Seeded perturbation so an all-zero mean init is not a fixed point when
// no pilots/anchors break the symmetry.
inline void perturb_if_zero(GaussianField& belief, double scale, std::uint64_t seed) {
    if (belief.mean.cwiseAbs().maxCoeff() > 0.0) return;
    Rng rng(seed);
    belief.mean = rng.cnormal_matrix(belief.rows(), belief.cols(), scale);
}

}  // namespace detail

// The full two-layer schedule. Known quantities: the leading pilot columns
// of X and the leading anchor rows of H^r (passed through Phi to become
// anchor rows of Q).
inline RunReport run_bamp(const CMat& y, const RisConfig& ris, const CMat& pilots,
                          const CMat& h_r_anchor_rows, const Priors& priors,
                          const BampConfig& config, double noise_var,
                          TruthRef truth = {}, const TraceSink& trace = nullptr) {
    config.validate();
    if (noise_var < 0.0) throw invalid_parameter("run_bamp: noise_var < 0");
    const Eigen::Index k_users = y.rows();
    const Eigen::Index t_slots = y.cols();
    const Eigen::Index n_ris = ris.n_elements;
    const Eigen::Index m_bs = pilots.rows();
    const Eigen::Index t_pilot = pilots.cols();
    const Eigen::Index k_anchor = h_r_anchor_rows.rows();
    if (m_bs < 1) throw invalid_parameter("run_bamp: pilot matrix must define M (>= 1 row)");
    if (t_pilot > t_slots) throw invalid_parameter("run_bamp: more pilot columns than slots");
    if (k_anchor > k_users) throw invalid_parameter("run_bamp: more anchor rows than users");
    if (k_anchor > 0 && h_r_anchor_rows.cols() != n_ris)
        throw invalid_dimension("run_bamp: anchor rows must have N columns");

    const double vf = config.var_floor;
    const double beta = config.damping;
    const double beta_m = config.mean_damping;
    const CMat q_anchor =
        (k_anchor > 0) ? CMat(h_r_anchor_rows * ris.phases.asDiagonal()) : CMat();

    // beliefs
    const cxd x0 = prior_mean(priors.x_prior);
    const double vx0 = std::max(prior_variance(priors.x_prior), vf);
    GaussianField x_belief(CMat::Constant(m_bs, t_slots, x0), RMat::Constant(m_bs, t_slots, vx0));
    detail::apply_pilot_delta(x_belief, pilots, vf);
    GaussianField hb_belief = GaussianField::zeros(
        n_ris, m_bs, std::max(priors.h_b_prior.rho * priors.h_b_prior.slab_var, vf));
    GaussianField q_belief = GaussianField::zeros(
        k_users, n_ris, std::max(priors.q_prior.rho * priors.q_prior.slab_var, vf));
    detail::apply_anchor_delta(q_belief, q_anchor, vf);

    // With no pilots and no anchors the all-zero mean init is a fixed
    // point of the message updates; seed a small perturbation.
    if (t_pilot == 0 && k_anchor == 0) {
        detail::perturb_if_zero(hb_belief, 0.01 * priors.h_b_prior.slab_var,
                                config.init_seed * 2654435761ULL + 11);
        detail::perturb_if_zero(q_belief, 0.01 * priors.q_prior.slab_var,
                                config.init_seed * 2654435761ULL + 13);
        if (x_belief.mean.cwiseAbs().maxCoeff() == 0.0)
            detail::perturb_if_zero(x_belief, 0.01 * std::max(prior_mean_power(priors.x_prior), vf),
                                    config.init_seed * 2654435761ULL + 17);
    }

    GaussianField u_belief = GaussianField::zeros(n_ris, t_slots, 1.0);
    GaussianField msg_to_u(CMat::Zero(n_ris, t_slots),
                           RMat::Constant(n_ris, t_slots, detail::kSigmaCap));  // flat at start

    // damped mean tracks; the cavity updates read these instead of the raw
    // posterior means, which keeps the loop stable without slowing the
    // plant products down
    CMat x_damp = x_belief.mean;
    CMat hb_damp = hb_belief.mean;
    CMat q_damp = q_belief.mean;
    CMat u_damp = u_belief.mean;

    LayerState layer1, layer2;
    const double y2 = y.squaredNorm();
    RunReport report;
    CMat prev_z_bar2;

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        std::uint64_t clamps = 0;

        // (1) layer-1 plant from (H^b, X) beliefs
        LayerState l1 = plant_estimates(hb_belief, x_belief, layer1, config.retain_product_var);
        l1.v_plant = l1.v_plant.cwiseMax(vf);

        // (2) layer-1 scores against the incoming inter-layer message
        ScoreResult sc1 = output_score_pseudo(l1.z_plant, l1.v_plant, msg_to_u);
        clamps += detail::clamp_vs(sc1.v_s, vf);
        if (iter > 1) {
            sc1.s_tilde = damp(sc1.s_tilde, layer1.s_tilde, beta);
            sc1.v_s = damp(sc1.v_s, layer1.v_s, beta);
        }
        l1.s_tilde = sc1.s_tilde;
        l1.v_s = sc1.v_s;

        // (3) cavity + EP projection for X and H^b
        const GaussianField hb_peer(hb_damp, hb_belief.var);
        const GaussianField x_peer(x_damp, x_belief.var);
        const GaussianField x_cav =
            input_update(hb_peer, sc1.s_tilde, sc1.v_s, x_damp, FactorSide::right, vf, &clamps);
        const GaussianField hb_cav =
            input_update(x_peer, sc1.s_tilde, sc1.v_s, hb_damp, FactorSide::left, vf, &clamps);
        GaussianField x_new = ep_project_field(priors.x_prior, x_cav, vf);
        detail::apply_pilot_delta(x_new, pilots, vf);
        GaussianField hb_new = ep_project_field(
            PriorSpec{priors.h_b_prior}, hb_cav, vf);
        x_belief = std::move(x_new);
        hb_belief = std::move(hb_new);
        detail::check_finite(x_belief, iter, "x_belief");
        detail::check_finite(hb_belief, iter, "h_b_belief");
        x_damp = (iter > 1) ? CMat(damp(x_belief.mean, x_damp, beta_m)) : x_belief.mean;
        hb_damp = (iter > 1) ? CMat(damp(hb_belief.mean, hb_damp, beta_m)) : hb_belief.mean;

        // (4) U belief = layer-1 posterior moments
        u_belief = GaussianField(sc1.z_tilde, sc1.v_tilde.cwiseMax(vf));
        u_damp = (iter > 1) ? CMat(damp(u_belief.mean, u_damp, beta_m)) : u_belief.mean;
        layer1 = l1;

        // (5)-(7), repeated inner_iters times
        GaussianField u_cav;
        for (int inner = 0; inner < config.inner_iters; ++inner) {
            LayerState l2 = plant_estimates(q_belief, u_belief, layer2, config.retain_product_var);
            l2.v_plant = l2.v_plant.cwiseMax(vf);

            ScoreResult sc2 = output_score_awgn(l2.z_plant, l2.v_plant, y, noise_var);
            clamps += detail::clamp_vs(sc2.v_s, vf);
            if (iter > 1 && inner == 0) {
                sc2.s_tilde = damp(sc2.s_tilde, layer2.s_tilde, beta);
                sc2.v_s = damp(sc2.v_s, layer2.v_s, beta);
            }
            l2.s_tilde = sc2.s_tilde;
            l2.v_s = sc2.v_s;

            const GaussianField u_peer(u_damp, u_belief.var);
            const GaussianField q_peer(q_damp, q_belief.var);
            const GaussianField q_cav =
                input_update(u_peer, sc2.s_tilde, sc2.v_s, q_damp, FactorSide::left, vf, &clamps);
            u_cav = input_update(q_peer, sc2.s_tilde, sc2.v_s, u_damp, FactorSide::right, vf,
                                 &clamps);
            GaussianField q_new = ep_project_field(PriorSpec{priors.q_prior}, q_cav, vf);
            detail::apply_anchor_delta(q_new, q_anchor, vf);
            q_belief = std::move(q_new);
            detail::check_finite(q_belief, iter, "q_belief");
            q_damp = (iter > 1) ? CMat(damp(q_belief.mean, q_damp, beta_m)) : q_belief.mean;
            layer2 = l2;

            if (inner + 1 < config.inner_iters) {
                // refresh U belief from the layer-1 plant and the new message
                ScoreResult rc = output_score_pseudo(layer1.z_plant, layer1.v_plant, u_cav);
                u_belief = GaussianField(rc.z_tilde, rc.v_tilde.cwiseMax(vf));
                u_damp = (iter > 1) ? CMat(damp(u_belief.mean, u_damp, beta_m)) : u_belief.mean;
            }
        }

        // (8) message back to layer 1 (Gaussian product over k already
        // accumulated inside the cavity)
        msg_to_u = u_cav;

        IterationRecord rec;
        rec.iteration = iter;
        rec.residual = (y2 > 0.0) ? (y - layer2.z_bar).squaredNorm() / y2 : 0.0;
        rec.clamp_count = clamps;
        if (truth.x || truth.h_b || truth.h_r) {
            rec.nmse_x_db = detail::nmse_db_or_nan(x_belief.mean, truth.x);
            rec.nmse_h_b_db = detail::nmse_db_or_nan(hb_belief.mean, truth.h_b);
            if (truth.h_r) {
                const CMat h_r_est = q_belief.mean * ris.phases.conjugate().asDiagonal();
                rec.nmse_h_r_db = detail::nmse_db_or_nan(h_r_est, truth.h_r);
            }
        }
        report.per_iteration.push_back(rec);
        if (trace) trace(rec);

        if (prev_z_bar2.size() > 0) {
            const double denom = layer2.z_bar.norm();
            const double rel = (denom > 0.0) ? (layer2.z_bar - prev_z_bar2).norm() / denom : 0.0;
            if (rel < config.stop_tol) {
                report.converged_at = iter;
                break;
            }
        }
        prev_z_bar2 = layer2.z_bar;
    }

    report.x_hat = x_belief.mean;
    report.h_b_hat = hb_belief.mean;
    report.q_hat = q_belief.mean;
    report.h_r_hat = q_belief.mean * ris.phases.conjugate().asDiagonal();
    return report;
}

inline RunReport run_bamp(const Scene& scene, const BampConfig& config,
                          bool with_truth_diagnostics = false, const TraceSink& trace = nullptr) {
    TruthRef truth;
    if (with_truth_diagnostics) {
        truth.x = &scene.x;
        truth.h_b = &scene.h_b;
        truth.h_r = &scene.h_r;
    }
    return run_bamp(scene.y, scene.ris, scene.pilot_block(), scene.anchor_rows(), scene.priors,
                    config, scene.noise_var, truth, trace);
}

}  // namespace bamp
