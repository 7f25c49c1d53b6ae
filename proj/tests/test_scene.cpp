#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bamp/scene.hpp"
#include "bamp/scene_io.hpp"

#include <sstream>

using namespace bamp;

TEST_CASE("dft_matrix small cases") {
    CHECK(dft_matrix(1)(0, 0) == cxd{1.0, 0.0});

    const CMat f2 = dft_matrix(2);
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(f2(0, 0) - cxd{r, 0}) < 1e-14);
    CHECK(std::abs(f2(0, 1) - cxd{r, 0}) < 1e-14);
    CHECK(std::abs(f2(1, 0) - cxd{r, 0}) < 1e-14);
    CHECK(std::abs(f2(1, 1) - cxd{-r, 0}) < 1e-14);

    // n=4 against direct evaluation of the closed form
    const CMat f4 = dft_matrix(4);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const double ang = -2.0 * std::numbers::pi * a * b / 4.0;
            CHECK(std::abs(f4(a, b) - cxd{std::cos(ang) / 2.0, std::sin(ang) / 2.0}) < 1e-12);
        }

    CHECK_THROWS_AS(dft_matrix(0), invalid_dimension);
}

TEST_CASE("dft_matrix is unitary for n in 1..64") {
    for (Eigen::Index n = 1; n <= 64; ++n) {
        const CMat f = dft_matrix(n);
        const CMat err = f * f.adjoint() - CMat::Identity(n, n);
        CHECK(err.cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("beamspace round trip") {
    Rng rng(7);
    const CMat h = rng.cnormal_matrix(13, 16);
    const CMat f = dft_matrix(16);
    CHECK(((h * f) * f.adjoint() - h).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sample_sparse_channel statistics") {
    SUBCASE("dense Gaussian limit") {
        const CMat h = sample_sparse_channel(400, 300, 1.0, 2.5, 42);
        const double emp_var = h.squaredNorm() / static_cast<double>(h.size());
        CHECK(emp_var == doctest::Approx(2.5).epsilon(0.05));
    }
    SUBCASE("empty support limit") {
        const CMat h = sample_sparse_channel(10, 10, 1e-9, 1.0, 42);
        CHECK(h.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("nonzero fraction") {
        const CMat h = sample_sparse_channel(400, 250, 0.2, 1.0, 42);
        int nz = 0;
        for (Eigen::Index i = 0; i < h.size(); ++i)
            if (std::abs(h(i)) > 0.0) ++nz;
        const double frac = static_cast<double>(nz) / static_cast<double>(h.size());
        CHECK(frac > 0.19);
        CHECK(frac < 0.21);
    }
    SUBCASE("reproducible and errors") {
        const CMat a = sample_sparse_channel(5, 5, 0.5, 1.0, 9);
        const CMat b = sample_sparse_channel(5, 5, 0.5, 1.0, 9);
        CHECK(a == b);
        CHECK_THROWS_AS(sample_sparse_channel(5, 5, 0.0, 1.0, 9), invalid_parameter);
        CHECK_THROWS_AS(sample_sparse_channel(5, 5, 1.5, 1.0, 9), invalid_parameter);
    }
}

TEST_CASE("build_ris_phases") {
    SUBCASE("1-bit phases are +-1") {
        const RisConfig cfg = build_ris_phases(200, 1, 3);
        for (Eigen::Index i = 0; i < cfg.phases.size(); ++i) {
            const cxd p = cfg.phases(i);
            CHECK((std::abs(p - cxd{1, 0}) < 1e-15 || std::abs(p - cxd{-1, 0}) < 1e-15));
        }
    }
    SUBCASE("unit modulus") {
        const RisConfig cfg = build_ris_phases(64, 3, 11);
        for (Eigen::Index i = 0; i < cfg.phases.size(); ++i)
            CHECK(std::abs(std::abs(cfg.phases(i)) - 1.0) < 1e-15);
    }
    SUBCASE("2-bit histogram") {
        const RisConfig cfg = build_ris_phases(10000, 2, 5);
        int counts[4] = {0, 0, 0, 0};
        const cxd grid[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        for (Eigen::Index i = 0; i < cfg.phases.size(); ++i)
            for (int g = 0; g < 4; ++g)
                if (std::abs(cfg.phases(i) - grid[g]) < 1e-12) ++counts[g];
        for (int g = 0; g < 4; ++g) {
            const double freq = counts[g] / 10000.0;
            CHECK(freq > 0.23);
            CHECK(freq < 0.27);
        }
    }
    CHECK_THROWS_AS(build_ris_phases(4, 0, 1), invalid_parameter);
}

TEST_CASE("design_signal") {
    SUBCASE("orthogonal pilot block") {
        const CMat x = design_signal(4, 4, 4, GaussianPrior{}, 1);
        Eigen::JacobiSVD<CMat> svd(x.leftCols(4));
        const auto& sv = svd.singularValues();
        CHECK(sv(3) > 1e-9);
        CHECK(sv(0) / sv(3) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("full rank with data columns") {
        const CMat x = design_signal(4, 8, 4, GaussianPrior{}, 1);
        Eigen::JacobiSVD<CMat> svd(x);
        CHECK(svd.singularValues()(3) > 1e-9);
    }
    SUBCASE("data column moments, half-normal |.|") {
        const CMat x = design_signal(2, 50002, 2, GaussianPrior{{0, 0}, 1.0}, 12);
        double mean_abs = 0.0;
        int n = 0;
        for (Eigen::Index j = 2; j < x.cols(); ++j)
            for (Eigen::Index i = 0; i < 2; ++i) {
                mean_abs += std::abs(x(i, j));
                ++n;
            }
        mean_abs /= n;
        // |CN(0,1)| is Rayleigh(1/sqrt(2)): E = sqrt(pi)/2
        CHECK(mean_abs == doctest::Approx(std::sqrt(std::numbers::pi) / 2.0).epsilon(0.02));
    }
    CHECK_THROWS_AS(design_signal(4, 4, 5, PriorSpec{GaussianPrior{}}, 1), invalid_parameter);
}

static Scene small_scene(double snr_db, std::uint64_t seed = 77) {
    SceneDims d;
    d.m_bs = 8;
    d.k_users = 32;
    d.n_ris = 16;
    d.t_slots = 40;
    d.t_pilot = 16;
    d.k_anchor = 8;
    Priors p;
    const RisConfig ris = build_ris_phases(d.n_ris, 2, seed + 1);
    return make_scene(d, p, ris, snr_db, seed);
}

TEST_CASE("make_scene contracts") {
    SUBCASE("noiseless means y = q*u exactly") {
        const Scene sc = small_scene(std::numeric_limits<double>::infinity());
        CHECK((sc.y - sc.q * sc.u).cwiseAbs().maxCoeff() == 0.0);
        CHECK(sc.noise_var == 0.0);
    }
    SUBCASE("shapes and self-consistency") {
        const Scene sc = small_scene(10.0);
        CHECK(sc.y.rows() == 32);
        CHECK(sc.y.cols() == 40);
        CHECK((sc.u - sc.h_b * sc.x).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sc.q - sc.h_r * sc.ris.phases.asDiagonal()).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("empirical SNR matches the target") {
        SceneDims d;
        d.m_bs = 16;
        d.k_users = 80;
        d.n_ris = 32;
        d.t_slots = 160;
        d.t_pilot = 16;
        d.k_anchor = 8;
        const RisConfig ris = build_ris_phases(d.n_ris, 2, 5);
        const Scene sc = make_scene(d, Priors{}, ris, 10.0, 4);
        const CMat w = sc.y - sc.q * sc.u;
        const double snr = 10.0 * std::log10((sc.q * sc.u).squaredNorm() / w.squaredNorm());
        CHECK(snr == doctest::Approx(10.0).epsilon(0.05));
    }
    SUBCASE("residual variance is near noise_var") {
        SceneDims d;
        d.m_bs = 16;
        d.k_users = 100;
        d.n_ris = 32;
        d.t_slots = 120;
        d.t_pilot = 16;
        d.k_anchor = 8;
        const RisConfig ris = build_ris_phases(d.n_ris, 2, 6);
        const Scene sc = make_scene(d, Priors{}, ris, 5.0, 8);
        const CMat w = sc.y - sc.q * sc.u;
        const double emp = w.squaredNorm() / static_cast<double>(w.size());
        CHECK(emp == doctest::Approx(sc.noise_var).epsilon(0.10));
    }
    SUBCASE("identical seeds give bit-identical scenes") {
        const Scene a = small_scene(10.0, 123);
        const Scene b = small_scene(10.0, 123);
        CHECK(a.y == b.y);
        CHECK(a.h_b == b.h_b);
        CHECK(a.x == b.x);
    }
}

TEST_CASE("scene serialization round trip") {
    const Scene sc = small_scene(10.0, 55);
    std::stringstream ss;
    save_scene(sc, ss);
    const Scene back = load_scene(ss);
    CHECK(back.y == sc.y);
    CHECK(back.h_b == sc.h_b);
    CHECK(back.h_r == sc.h_r);
    CHECK(back.q == sc.q);
    CHECK(back.x == sc.x);
    CHECK(back.u == sc.u);
    CHECK(back.ris.phases == sc.ris.phases);
    CHECK(back.noise_var == sc.noise_var);
    CHECK(back.seed == sc.seed);
    CHECK(back.dims.t_pilot == sc.dims.t_pilot);
    CHECK(back.priors.h_b_prior.rho == sc.priors.h_b_prior.rho);

    std::stringstream bad("not a scene file at all");
    CHECK_THROWS_AS(load_scene(bad), io_error);
}
