#pragma once

// Test-only numeric oracles, independent of the library's inference path:
// quadrature over Gaussian products and densities evaluated from first
// principles.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

using cxd = std::complex<double>;

// real Gaussian pdf
inline double npdf(double x, double mean, double var) {
    return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) /
           std::sqrt(2.0 * std::numbers::pi * var);
}

// circularly-symmetric complex Gaussian pdf, total variance var
inline double cnpdf(cxd x, cxd mean, double var) {
    return std::exp(-std::norm(x - mean) / var) / (std::numbers::pi * var);
}

// composite Simpson on [a,b]
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 801) {
    if (n % 2 == 0) ++n;
    const double h = (b - a) / (n - 1);
    double s = f(a) + f(b);
    for (int i = 1; i < n - 1; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

struct Moments {
    cxd mean;
    double var;  // E|x - mean|^2
};

// Moments of w(x) * CN(x; R, Sigma) over the complex plane by tensor
// Simpson, where w is a density given as a callable. The integration box is
// centred on R with half-width spread.
inline Moments complex_product_moments(const std::function<double(cxd)>& w, cxd R, double Sigma,
                                       double spread, int n = 301) {
    if (n % 2 == 0) ++n;
    const double h = 2.0 * spread / (n - 1);
    double z = 0.0, e2 = 0.0;
    cxd m{0.0, 0.0};
    for (int i = 0; i < n; ++i) {
        const double wi = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double xr = R.real() - spread + i * h;
        for (int j = 0; j < n; ++j) {
            const double wj = (j == 0 || j == n - 1) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            const double xi = R.imag() - spread + j * h;
            const cxd x{xr, xi};
            const double f = wi * wj * w(x) * cnpdf(x, R, Sigma);
            z += f;
            m += f * x;
            e2 += f * std::norm(x);
        }
    }
    m /= z;
    e2 /= z;
    return {m, e2 - std::norm(m)};
}

// Moments of a spike-and-slab times CN(x;R,Sigma): spike handled
// analytically, slab by quadrature.
inline Moments bernoulli_gaussian_product_moments(double rho, double slab_var, cxd R,
                                                  double Sigma) {
    const double spread = 7.0 * std::sqrt(slab_var + Sigma) + std::abs(R);
    double slab_z = 0.0, slab_e2 = 0.0;
    cxd slab_m{0.0, 0.0};
    const int n = 401;
    const double h = 2.0 * spread / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double wi = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double xr = -spread + i * h;
        for (int j = 0; j < n; ++j) {
            const double wj = (j == 0 || j == n - 1) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            const double xi = -spread + j * h;
            const cxd x{xr, xi};
            const double f = wi * wj * cnpdf(x, {0.0, 0.0}, slab_var) * cnpdf(x, R, Sigma);
            slab_z += f;
            slab_m += f * x;
            slab_e2 += f * std::norm(x);
        }
    }
    const double scale = h * h / 9.0;
    slab_z *= scale;
    slab_m *= scale;
    slab_e2 *= scale;
    const double spike_z = (1.0 - rho) * cnpdf({0.0, 0.0}, R, Sigma);
    const double z = spike_z + rho * slab_z;
    const cxd mean = rho * slab_m / z;
    const double e2 = rho * slab_e2 / z;
    return {mean, e2 - std::norm(mean)};
}

// log of the AWGN evidence G(Z,V) = log int N(u; Z, V) N(y; u, n0) du for
// real scalars, evaluated in closed form independently of the score code.
inline double awgn_log_evidence(double z, double v, double y, double n0) {
    return std::log(npdf(y, z, v + n0));
}

}  // namespace oracle
