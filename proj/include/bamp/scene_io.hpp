#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "scene.hpp"
#include "types.hpp"

// Binary scene container. Layout (little-endian):
//   magic "BAMPSCN1" (8 bytes), format version u32
//   dims: m_bs, k_users, n_ris, t_slots, t_pilot, k_anchor as u64
//   seed u64, snr_db f64, noise_var f64
//   ris: bits u32, phases as n_ris complex entries
//   x prior: tag u32 (0 Gaussian, 1 Bernoulli-Gaussian, 2 mixture) + params
//   h_b prior: rho f64, slab_var f64;  q prior: rho f64, slab_var f64
//   matrices h_b, h_r, q, x, u, y: row-major, each entry re,im as f64
// All complex data is 64-bit float re,im interleaved.

namespace bamp {

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace io_detail {

constexpr char kMagic[8] = {'B', 'A', 'M', 'P', 'S', 'C', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw io_error("scene file truncated");
    return v;
}

inline void put_cmat(std::ostream& os, const CMat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            put(os, m(i, j).real());
            put(os, m(i, j).imag());
        }
}

inline CMat get_cmat(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
    CMat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double re = get<double>(is);
            const double im = get<double>(is);
            m(i, j) = cxd{re, im};
        }
    return m;
}

inline void put_prior(std::ostream& os, const PriorSpec& spec) {
    if (const auto* g = std::get_if<GaussianPrior>(&spec)) {
        put<std::uint32_t>(os, 0);
        put(os, g->mean.real());
        put(os, g->mean.imag());
        put(os, g->var);
    } else if (const auto* bg = std::get_if<BernoulliGaussianPrior>(&spec)) {
        put<std::uint32_t>(os, 1);
        put(os, bg->rho);
        put(os, bg->slab_var);
    } else {
        const auto& m = std::get<MixturePrior>(spec);
        put<std::uint32_t>(os, 2);
        put<std::uint64_t>(os, m.weights.size());
        for (std::size_t j = 0; j < m.weights.size(); ++j) {
            put(os, m.weights[j]);
            put(os, m.means[j].real());
            put(os, m.means[j].imag());
            put(os, m.vars[j]);
        }
    }
}

inline PriorSpec get_prior(std::istream& is) {
    const auto tag = get<std::uint32_t>(is);
    if (tag == 0) {
        const double re = get<double>(is), im = get<double>(is), v = get<double>(is);
        return GaussianPrior{{re, im}, v};
    }
    if (tag == 1) {
        const double rho = get<double>(is), sv = get<double>(is);
        return BernoulliGaussianPrior{rho, sv};
    }
    if (tag == 2) {
        MixturePrior m;
        const auto n = get<std::uint64_t>(is);
        for (std::uint64_t j = 0; j < n; ++j) {
            m.weights.push_back(get<double>(is));
            const double re = get<double>(is), im = get<double>(is);
            m.means.push_back({re, im});
            m.vars.push_back(get<double>(is));
        }
        return m;
    }
    throw io_error("scene file: unknown prior tag");
}

}  // namespace io_detail

inline void save_scene(const Scene& sc, std::ostream& os) {
    using namespace io_detail;
    os.write(kMagic, sizeof(kMagic));
    put(os, kVersion);
    put<std::uint64_t>(os, sc.dims.m_bs);
    put<std::uint64_t>(os, sc.dims.k_users);
    put<std::uint64_t>(os, sc.dims.n_ris);
    put<std::uint64_t>(os, sc.dims.t_slots);
    put<std::uint64_t>(os, sc.dims.t_pilot);
    put<std::uint64_t>(os, sc.dims.k_anchor);
    put(os, sc.seed);
    put(os, sc.snr_db);
    put(os, sc.noise_var);
    put<std::uint32_t>(os, sc.ris.bits);
    for (Eigen::Index i = 0; i < sc.ris.phases.size(); ++i) {
        put(os, sc.ris.phases(i).real());
        put(os, sc.ris.phases(i).imag());
    }
    put_prior(os, sc.priors.x_prior);
    put(os, sc.priors.h_b_prior.rho);
    put(os, sc.priors.h_b_prior.slab_var);
    put(os, sc.priors.q_prior.rho);
    put(os, sc.priors.q_prior.slab_var);
    put_cmat(os, sc.h_b);
    put_cmat(os, sc.h_r);
    put_cmat(os, sc.q);
    put_cmat(os, sc.x);
    put_cmat(os, sc.u);
    put_cmat(os, sc.y);
    if (!os) throw io_error("scene write failed");
}

inline Scene load_scene(std::istream& is) {
    using namespace io_detail;
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw io_error("not a scene file (bad magic)");
    if (get<std::uint32_t>(is) != kVersion) throw io_error("unsupported scene file version");
    Scene sc;
    sc.dims.m_bs = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    sc.dims.k_users = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    sc.dims.n_ris = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    sc.dims.t_slots = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    sc.dims.t_pilot = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    sc.dims.k_anchor = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    sc.dims.validate();
    sc.seed = get<std::uint64_t>(is);
    sc.snr_db = get<double>(is);
    sc.noise_var = get<double>(is);
    sc.ris.n_elements = sc.dims.n_ris;
    sc.ris.bits = get<std::uint32_t>(is);
    sc.ris.phases.resize(sc.dims.n_ris);
    for (Eigen::Index i = 0; i < sc.dims.n_ris; ++i) {
        const double re = get<double>(is), im = get<double>(is);
        sc.ris.phases(i) = cxd{re, im};
    }
    sc.priors.x_prior = get_prior(is);
    sc.priors.h_b_prior.rho = get<double>(is);
    sc.priors.h_b_prior.slab_var = get<double>(is);
    sc.priors.q_prior.rho = get<double>(is);
    sc.priors.q_prior.slab_var = get<double>(is);
    sc.h_b = get_cmat(is, sc.dims.n_ris, sc.dims.m_bs);
    sc.h_r = get_cmat(is, sc.dims.k_users, sc.dims.n_ris);
    sc.q = get_cmat(is, sc.dims.k_users, sc.dims.n_ris);
    sc.x = get_cmat(is, sc.dims.m_bs, sc.dims.t_slots);
    sc.u = get_cmat(is, sc.dims.n_ris, sc.dims.t_slots);
    sc.y = get_cmat(is, sc.dims.k_users, sc.dims.t_slots);
    return sc;
}

// Atomic write: stage into <path>.tmp, rename on success.
inline void save_scene_file(const Scene& sc, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw io_error("cannot open " + tmp + " for writing");
        save_scene(sc, os);
    }
    std::filesystem::rename(tmp, path);
}

inline Scene load_scene_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open scene file " + path);
    return load_scene(is);
}

}  // namespace bamp
