#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "types.hpp"

namespace bamp {

// Per-entry prior families. All Gaussians are circularly-symmetric complex
// with total variance E|x-mean|^2. A Gaussian prior with var == 0 acts as a
// delta prior (known entry).
struct GaussianPrior {
    cxd mean{0.0, 0.0};
    double var = 1.0;
};

struct BernoulliGaussianPrior {
    double rho = 0.2;       // P(entry != 0)
    double slab_var = 1.0;  // variance of the nonzero component
};

struct MixturePrior {
    std::vector<double> weights;
    std::vector<cxd> means;
    std::vector<double> vars;
};

using PriorSpec = std::variant<GaussianPrior, BernoulliGaussianPrior, MixturePrior>;

inline void validate(const PriorSpec& spec) {
    if (const auto* g = std::get_if<GaussianPrior>(&spec)) {
        if (g->var < 0.0) throw invalid_parameter("Gaussian prior: var < 0");
    } else if (const auto* bg = std::get_if<BernoulliGaussianPrior>(&spec)) {
        if (bg->rho <= 0.0 || bg->rho > 1.0)
            throw invalid_parameter("Bernoulli-Gaussian prior: rho outside (0,1]");
        if (bg->slab_var <= 0.0) throw invalid_parameter("Bernoulli-Gaussian prior: slab_var <= 0");
    } else {
        const auto& m = std::get<MixturePrior>(spec);
        if (m.weights.empty() || m.weights.size() != m.means.size() ||
            m.weights.size() != m.vars.size())
            throw invalid_parameter("mixture prior: inconsistent component lists");
        double wsum = 0.0;
        for (double w : m.weights) {
            if (w < 0.0) throw invalid_parameter("mixture prior: negative weight");
            wsum += w;
        }
        if (wsum <= 0.0) throw invalid_parameter("mixture prior: all weights zero");
        for (double v : m.vars)
            if (v <= 0.0) throw invalid_parameter("mixture prior: component var <= 0");
    }
}

inline double prior_mean_power(const PriorSpec& spec) {
    if (const auto* g = std::get_if<GaussianPrior>(&spec)) return std::norm(g->mean) + g->var;
    if (const auto* bg = std::get_if<BernoulliGaussianPrior>(&spec)) return bg->rho * bg->slab_var;
    const auto& m = std::get<MixturePrior>(spec);
    double wsum = 0.0, p = 0.0;
    for (std::size_t j = 0; j < m.weights.size(); ++j) {
        wsum += m.weights[j];
        p += m.weights[j] * (std::norm(m.means[j]) + m.vars[j]);
    }
    return p / wsum;
}

inline cxd prior_mean(const PriorSpec& spec) {
    if (const auto* g = std::get_if<GaussianPrior>(&spec)) return g->mean;
    if (std::holds_alternative<BernoulliGaussianPrior>(spec)) return {0.0, 0.0};
    const auto& m = std::get<MixturePrior>(spec);
    double wsum = 0.0;
    cxd mu{0.0, 0.0};
    for (std::size_t j = 0; j < m.weights.size(); ++j) {
        wsum += m.weights[j];
        mu += m.weights[j] * m.means[j];
    }
    return mu / wsum;
}

inline double prior_variance(const PriorSpec& spec) {
    return prior_mean_power(spec) - std::norm(prior_mean(spec));
}

struct ScalarMoments {
    cxd mean;
    double var;
};

// Posterior moments of prior(x) * CN(x; R, Sigma), closed form per family.
inline ScalarMoments ep_project(const GaussianPrior& p, cxd R, double Sigma) {
    if (p.var == 0.0) return {p.mean, 0.0};  // delta prior: entry is known
    const double denom = p.var + Sigma;
    const double var = p.var * Sigma / denom;
    const cxd mean = (Sigma * p.mean + p.var * R) / denom;
    return {mean, var};
}

inline ScalarMoments ep_project(const BernoulliGaussianPrior& p, cxd R, double Sigma) {
    if (Sigma <= 0.0) throw invalid_parameter("ep_project: Sigma <= 0");
    const double v0 = p.slab_var;
    // slab posterior moments
    const cxd m_slab = R * (v0 / (v0 + Sigma));
    const double s_slab = v0 * Sigma / (v0 + Sigma);
    // log marginal likelihoods of R under slab / spike (complex Gaussian)
    const double r2 = std::norm(R);
    const double ll_slab = -std::log(v0 + Sigma) - r2 / (v0 + Sigma);
    const double ll_spike = -std::log(Sigma) - r2 / Sigma;
    double pi_slab;
    if (p.rho >= 1.0) {
        pi_slab = 1.0;
    } else {
        const double lo = std::log(p.rho) + ll_slab;
        const double ls = std::log1p(-p.rho) + ll_spike;
        pi_slab = 1.0 / (1.0 + std::exp(ls - lo));
    }
    const cxd mean = pi_slab * m_slab;
    const double e2 = pi_slab * (s_slab + std::norm(m_slab));
    return {mean, std::max(e2 - std::norm(mean), 0.0)};
}

inline ScalarMoments ep_project(const MixturePrior& p, cxd R, double Sigma) {
    if (Sigma <= 0.0) throw invalid_parameter("ep_project: Sigma <= 0");
    const std::size_t J = p.weights.size();
    std::vector<double> logw(J);
    std::vector<cxd> m(J);
    std::vector<double> s(J);
    double maxlw = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) {
        const double vj = p.vars[j];
        const double denom = vj + Sigma;
        m[j] = (Sigma * p.means[j] + vj * R) / denom;
        s[j] = vj * Sigma / denom;
        logw[j] = (p.weights[j] > 0.0 ? std::log(p.weights[j]) : -1e300) - std::log(denom) -
                  std::norm(R - p.means[j]) / denom;
        maxlw = std::max(maxlw, logw[j]);
    }
    double wsum = 0.0;
    cxd mean{0.0, 0.0};
    double e2 = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        const double w = std::exp(logw[j] - maxlw);
        wsum += w;
        mean += w * m[j];
        e2 += w * (s[j] + std::norm(m[j]));
    }
    mean /= wsum;
    e2 /= wsum;
    return {mean, std::max(e2 - std::norm(mean), 0.0)};
}

inline ScalarMoments ep_project(const PriorSpec& spec, cxd R, double Sigma) {
    validate(spec);
    return std::visit([&](const auto& p) { return ep_project(p, R, Sigma); }, spec);
}

// Field-level projection with a shared prior for every entry.
inline GaussianField ep_project_field(const PriorSpec& spec, const GaussianField& cavity,
                                      double var_floor) {
    validate(spec);
    GaussianField out;
    out.mean.resize(cavity.rows(), cavity.cols());
    out.var.resize(cavity.rows(), cavity.cols());
    std::visit(
        [&](const auto& p) {
            for (Eigen::Index j = 0; j < cavity.cols(); ++j)
                for (Eigen::Index i = 0; i < cavity.rows(); ++i) {
                    const auto mom = ep_project(p, cavity.mean(i, j), cavity.var(i, j));
                    out.mean(i, j) = mom.mean;
                    out.var(i, j) = std::max(mom.var, var_floor);
                }
        },
        spec);
    return out;
}

// Projection against an entrywise Gaussian prior field (used by the
// baseline's product-variable prior).
inline GaussianField ep_project_gaussian_field(const GaussianField& prior,
                                               const GaussianField& cavity, double var_floor) {
    GaussianField out;
    out.mean.resize(cavity.rows(), cavity.cols());
    out.var.resize(cavity.rows(), cavity.cols());
    for (Eigen::Index j = 0; j < cavity.cols(); ++j)
        for (Eigen::Index i = 0; i < cavity.rows(); ++i) {
            const auto mom = ep_project(GaussianPrior{prior.mean(i, j), prior.var(i, j)},
                                        cavity.mean(i, j), cavity.var(i, j));
            out.mean(i, j) = mom.mean;
            out.var(i, j) = std::max(mom.var, var_floor);
        }
    return out;
}

}  // namespace bamp
