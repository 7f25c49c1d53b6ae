#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace bamp {

using cxd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;

// Parameter/contract violations at the API surface.
struct invalid_parameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct invalid_dimension : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
// Non-finite values or degenerate numerics mid-computation.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline RMat abs2(const CMat& a) { return a.array().abs2().matrix(); }

inline void require_same_shape(const CMat& a, const RMat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw invalid_dimension(std::string(what) + ": mean/var shape mismatch");
}

// Elementwise mean + variance over a matrix of unknowns. Variances are
// total complex variances E|x - mean|^2.
struct GaussianField {
    CMat mean;
    RMat var;

    GaussianField() = default;
    GaussianField(CMat m, RMat v) : mean(std::move(m)), var(std::move(v)) {
        require_same_shape(mean, var, "GaussianField");
    }

    static GaussianField zeros(Eigen::Index rows, Eigen::Index cols, double v = 1.0) {
        return GaussianField(CMat::Zero(rows, cols), RMat::Constant(rows, cols, v));
    }

    Eigen::Index rows() const { return mean.rows(); }
    Eigen::Index cols() const { return mean.cols(); }
};

inline bool all_finite(const CMat& a) { return a.array().isFinite().all(); }
inline bool all_finite(const RMat& a) { return a.array().isFinite().all(); }

}  // namespace bamp
