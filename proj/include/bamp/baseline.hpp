#pragma once

#include <cmath>
#include <vector>

#include "inference.hpp"
#include "priors.hpp"
#include "scene.hpp"
#include "types.hpp"

namespace bamp {

struct ill_conditioned_pilot : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct rank_deficiency_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BaselineReport {
    CMat h_b_hat;
    CMat q_hat;
    CMat h_r_hat;
    CMat x_d_hat;  // [M x (T - T_p)]
    std::vector<double> stage1_residual;
};

namespace detail {

inline CMat pinv_full_row_rank(const CMat& a, const char* what) {
    Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double tol = 1e-10 * smax * std::max(a.rows(), a.cols());
    if (smax <= 0.0 || sv(sv.size() - 1) <= tol)
        throw ill_conditioned_pilot(std::string(what) + ": rank-deficient matrix");
    Eigen::VectorXd inv = sv.cwiseInverse();
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace detail

// Stage 1 of the BiGAMP+LS benchmark: bilinear AMP over Y_p = Q * G + W
// with G = H^b * X_p, then H^b recovered through the pilot pseudo-inverse.
// Reuses the same plant/score/input kernels as the two-layer algorithm.
inline std::pair<CMat, CMat> run_bigamp_pilot(const CMat& y_pilot, const RisConfig& ris,
                                              const CMat& x_pilot, const CMat& h_r_anchor_rows,
                                              const Priors& priors, const BampConfig& config,
                                              double noise_var,
                                              std::vector<double>* residuals = nullptr) {
    config.validate();
    const Eigen::Index k_users = y_pilot.rows();
    const Eigen::Index t_pilot = y_pilot.cols();
    const Eigen::Index m_bs = x_pilot.rows();
    const Eigen::Index n_ris = ris.n_elements;
    if (x_pilot.cols() != t_pilot)
        throw invalid_dimension("run_bigamp_pilot: pilot block column mismatch");
    if (t_pilot < m_bs)
        throw invalid_parameter("run_bigamp_pilot: requires T_p >= M for the pseudo-inverse");
    const CMat x_pinv = detail::pinv_full_row_rank(x_pilot, "run_bigamp_pilot pilot block");

    const double vf = config.var_floor;
    const double beta = config.damping;
    const double beta_m = config.mean_damping;
    const Eigen::Index k_anchor = h_r_anchor_rows.rows();
    const CMat q_anchor =
        (k_anchor > 0) ? CMat(h_r_anchor_rows * ris.phases.asDiagonal()) : CMat();

    // Entrywise Gaussian prior for G = H^b X_p: zero mean, variance
    // E|h|^2 * sum_m |x_p[m,t]|^2 per entry.
    const double eh2 = priors.h_b_prior.rho * priors.h_b_prior.slab_var;
    GaussianField g_prior;
    g_prior.mean = CMat::Zero(n_ris, t_pilot);
    g_prior.var = RMat::Zero(n_ris, t_pilot);
    const Eigen::RowVectorXd col_power = abs2(x_pilot).colwise().sum();
    for (Eigen::Index j = 0; j < t_pilot; ++j)
        g_prior.var.col(j).setConstant(std::max(eh2 * col_power(j), vf));

    GaussianField q_belief = GaussianField::zeros(k_users, n_ris, std::max(eh2, vf));
    q_belief.var.setConstant(std::max(priors.q_prior.rho * priors.q_prior.slab_var, vf));
    detail::apply_anchor_delta(q_belief, q_anchor, vf);
    GaussianField g_belief = g_prior;
    if (k_anchor == 0)
        detail::perturb_if_zero(g_belief, 0.01, config.init_seed * 2654435761ULL + 19);

    LayerState layer;
    const double y2 = y_pilot.squaredNorm();
    CMat prev_z_bar;
    CMat q_damp = q_belief.mean;
    CMat g_damp = g_belief.mean;

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        std::uint64_t clamps = 0;
        LayerState l = plant_estimates(q_belief, g_belief, layer, config.retain_product_var);
        l.v_plant = l.v_plant.cwiseMax(vf);

        ScoreResult sc = output_score_awgn(l.z_plant, l.v_plant, y_pilot, noise_var);
        clamps += detail::clamp_vs(sc.v_s, vf);
        if (iter > 1) {
            sc.s_tilde = damp(sc.s_tilde, layer.s_tilde, beta);
            sc.v_s = damp(sc.v_s, layer.v_s, beta);
        }
        l.s_tilde = sc.s_tilde;
        l.v_s = sc.v_s;

        const GaussianField g_peer(g_damp, g_belief.var);
        const GaussianField q_peer(q_damp, q_belief.var);
        const GaussianField q_cav =
            input_update(g_peer, sc.s_tilde, sc.v_s, q_damp, FactorSide::left, vf, &clamps);
        const GaussianField g_cav =
            input_update(q_peer, sc.s_tilde, sc.v_s, g_damp, FactorSide::right, vf, &clamps);
        GaussianField q_new = ep_project_field(PriorSpec{priors.q_prior}, q_cav, vf);
        detail::apply_anchor_delta(q_new, q_anchor, vf);
        q_belief = std::move(q_new);
        g_belief = ep_project_gaussian_field(g_prior, g_cav, vf);
        detail::check_finite(q_belief, iter, "q_belief");
        detail::check_finite(g_belief, iter, "g_belief");
        q_damp = (iter > 1) ? CMat(damp(q_belief.mean, q_damp, beta_m)) : q_belief.mean;
        g_damp = (iter > 1) ? CMat(damp(g_belief.mean, g_damp, beta_m)) : g_belief.mean;
        layer = l;

        if (residuals)
            residuals->push_back((y2 > 0.0) ? (y_pilot - layer.z_bar).squaredNorm() / y2 : 0.0);
        if (prev_z_bar.size() > 0) {
            const double denom = layer.z_bar.norm();
            if (denom > 0.0 && (layer.z_bar - prev_z_bar).norm() / denom < config.stop_tol) break;
        }
        prev_z_bar = layer.z_bar;
    }

    const CMat h_b_hat = g_belief.mean * x_pinv;
    return {h_b_hat, q_belief.mean};
}

// Stage 2: least-squares recovery of the data block through the estimated
// effective channel A = Q_hat * H^b_hat.
inline CMat ls_recover(const CMat& y_data, const CMat& q_hat, const CMat& h_b_hat) {
    const CMat a = q_hat * h_b_hat;  // [K x M]
    const Eigen::Index m_bs = a.cols();
    Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-10 * sv(0) * std::max(a.rows(), a.cols());
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    if (rank < m_bs)
        throw rank_deficiency_error("ls_recover: effective channel rank " + std::to_string(rank) +
                                    " < M = " + std::to_string(m_bs));
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < rank; ++i) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint() * y_data;
}

inline BaselineReport run_baseline(const Scene& scene, const BampConfig& config) {
    const Eigen::Index t_pilot = scene.dims.t_pilot;
    BaselineReport rep;
    auto [h_b_hat, q_hat] =
        run_bigamp_pilot(scene.y.leftCols(t_pilot), scene.ris, scene.pilot_block(),
                         scene.anchor_rows(), scene.priors, config, scene.noise_var,
                         &rep.stage1_residual);
    rep.h_b_hat = h_b_hat;
    rep.q_hat = q_hat;
    rep.h_r_hat = q_hat * scene.ris.phases.conjugate().asDiagonal();
    if (t_pilot < scene.dims.t_slots)
        rep.x_d_hat = ls_recover(scene.y.rightCols(scene.dims.t_slots - t_pilot), q_hat, h_b_hat);
    else
        rep.x_d_hat = CMat::Zero(scene.dims.m_bs, 0);
    return rep;
}

inline CMat baseline_x_hat(const Scene& scene, const BaselineReport& rep) {
    CMat x(scene.dims.m_bs, scene.dims.t_slots);
    x.leftCols(scene.dims.t_pilot) = scene.pilot_block();
    if (rep.x_d_hat.cols() > 0) x.rightCols(rep.x_d_hat.cols()) = rep.x_d_hat;
    return x;
}

}  // namespace bamp
