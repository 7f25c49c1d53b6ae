#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>

#include "baseline.hpp"
#include "inference.hpp"
#include "scene_io.hpp"

// Binary run-report container, same conventions as the scene format:
//   magic "BAMPRPT1", version u32, algorithm tag u32 (0 bamp, 1 bigamp_ls)
//   matrix block per estimate: rows u64, cols u64, row-major re,im f64
//   iteration records: count u64, then per record
//     iteration i32, residual f64, nmse_x/h_b/h_r f64, clamp_count u64

namespace bamp {

namespace io_detail {

constexpr char kReportMagic[8] = {'B', 'A', 'M', 'P', 'R', 'P', 'T', '1'};

inline void put_sized_cmat(std::ostream& os, const CMat& m) {
    put<std::uint64_t>(os, m.rows());
    put<std::uint64_t>(os, m.cols());
    put_cmat(os, m);
}

inline CMat get_sized_cmat(std::istream& is) {
    const auto rows = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    const auto cols = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    return get_cmat(is, rows, cols);
}

}  // namespace io_detail

inline void save_report(const RunReport& rep, std::ostream& os) {
    using namespace io_detail;
    os.write(kReportMagic, sizeof(kReportMagic));
    put<std::uint32_t>(os, 1);
    put<std::uint32_t>(os, 0);
    put_sized_cmat(os, rep.x_hat);
    put_sized_cmat(os, rep.h_b_hat);
    put_sized_cmat(os, rep.q_hat);
    put_sized_cmat(os, rep.h_r_hat);
    put<std::uint64_t>(os, rep.per_iteration.size());
    for (const auto& r : rep.per_iteration) {
        put<std::int32_t>(os, r.iteration);
        put(os, r.residual);
        put(os, r.nmse_x_db);
        put(os, r.nmse_h_b_db);
        put(os, r.nmse_h_r_db);
        put(os, r.clamp_count);
    }
    put<std::int32_t>(os, rep.converged_at.value_or(-1));
    if (!os) throw io_error("report write failed");
}

inline void save_report(const BaselineReport& rep, const CMat& x_hat_full, std::ostream& os) {
    using namespace io_detail;
    os.write(kReportMagic, sizeof(kReportMagic));
    put<std::uint32_t>(os, 1);
    put<std::uint32_t>(os, 1);
    put_sized_cmat(os, x_hat_full);
    put_sized_cmat(os, rep.h_b_hat);
    put_sized_cmat(os, rep.q_hat);
    put_sized_cmat(os, rep.h_r_hat);
    put<std::uint64_t>(os, rep.stage1_residual.size());
    for (std::size_t i = 0; i < rep.stage1_residual.size(); ++i) {
        put<std::int32_t>(os, static_cast<std::int32_t>(i + 1));
        put(os, rep.stage1_residual[i]);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        put(os, nan);
        put(os, nan);
        put(os, nan);
        put<std::uint64_t>(os, 0);
    }
    put<std::int32_t>(os, -1);
    if (!os) throw io_error("report write failed");
}

inline RunReport load_report(std::istream& is) {
    using namespace io_detail;
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kReportMagic, sizeof(magic)) != 0)
        throw io_error("not a report file (bad magic)");
    if (get<std::uint32_t>(is) != 1) throw io_error("unsupported report version");
    get<std::uint32_t>(is);  // algorithm tag
    RunReport rep;
    rep.x_hat = get_sized_cmat(is);
    rep.h_b_hat = get_sized_cmat(is);
    rep.q_hat = get_sized_cmat(is);
    rep.h_r_hat = get_sized_cmat(is);
    const auto n = get<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < n; ++i) {
        IterationRecord r;
        r.iteration = get<std::int32_t>(is);
        r.residual = get<double>(is);
        r.nmse_x_db = get<double>(is);
        r.nmse_h_b_db = get<double>(is);
        r.nmse_h_r_db = get<double>(is);
        r.clamp_count = get<std::uint64_t>(is);
        rep.per_iteration.push_back(r);
    }
    const auto conv = get<std::int32_t>(is);
    if (conv >= 0) rep.converged_at = conv;
    return rep;
}

template <typename WriteFn>
inline void atomic_write_file(const std::string& path, WriteFn&& fn) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw io_error("cannot open " + tmp + " for writing");
        fn(os);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace bamp
