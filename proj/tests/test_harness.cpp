#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "bamp/config.hpp"
#include "bamp/harness.hpp"

using namespace bamp;

TEST_CASE("nmse_db") {
    Rng rng(8);
    const CMat t = rng.cnormal_matrix(4, 4);
    CHECK(nmse_db(t, t) == -200.0);
    CHECK(nmse_db(CMat::Zero(4, 4), t) == doctest::Approx(0.0));
    CHECK(nmse_db(2.0 * t, t) == doctest::Approx(0.0));
    CHECK_THROWS_AS(nmse_db(t, CMat::Zero(4, 4)), invalid_parameter);
    CHECK_THROWS_AS(nmse_db(t, CMat::Zero(3, 4)), invalid_dimension);
}

TEST_CASE("align_estimates") {
    Rng rng(19);
    const Eigen::Index m = 4, n = 6, k = 8, t = 10, tp = 4, kp = 3;
    const CMat x = rng.cnormal_matrix(m, t);
    const CMat hb = rng.cnormal_matrix(n, m);
    const CMat hr = rng.cnormal_matrix(k, n);

    SUBCASE("constructed diagonal ambiguity is removed") {
        Eigen::VectorXcd c(m), d(n);
        for (Eigen::Index i = 0; i < m; ++i) c(i) = rng.cnormal(1.0) + cxd{2.0, 0.0};
        for (Eigen::Index i = 0; i < n; ++i) d(i) = rng.cnormal(1.0) + cxd{2.0, 0.0};
        Estimates est;
        est.x_hat = c.cwiseInverse().asDiagonal() * x;         // C^-1 X
        est.h_b_hat = d.asDiagonal() * hb * c.asDiagonal();    // D Hb C
        est.h_r_hat = hr * d.cwiseInverse().asDiagonal();      // Hr D^-1
        const Estimates out = align_estimates(est, x.leftCols(tp), hr.topRows(kp));
        CHECK(nmse_db(out.x_hat, x) <= -100.0);
        CHECK(nmse_db(out.h_b_hat, hb) <= -100.0);
        CHECK(nmse_db(out.h_r_hat, hr) <= -100.0);
    }
    SUBCASE("identity on estimates that honor the anchors") {
        Estimates est{x, hb, hr};
        const Estimates out = align_estimates(est, x.leftCols(tp), hr.topRows(kp));
        CHECK((out.x_hat - x).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((out.h_r_hat - hr).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("single anchor row, scalar ambiguity") {
        Estimates est{x, hb, 0.5 * hr};  // scale c = 2 to recover
        const Estimates out = align_estimates(est, CMat(m, 0), hr.topRows(1));
        CHECK(nmse_db(out.h_r_hat, hr) <= -180.0);
    }
    SUBCASE("zero-norm anchor column is skipped with diagnostic") {
        Estimates est{x, hb, hr};
        Estimates zeroed = est;
        zeroed.h_r_hat.col(0).topRows(kp).setZero();
        int skipped = 0;
        align_estimates(zeroed, x.leftCols(tp), hr.topRows(kp), &skipped);
        CHECK(skipped == 1);
    }
    CHECK_THROWS_AS(align_estimates(Estimates{x, hb, hr}, CMat(m, 0), CMat(0, n)),
                    invalid_parameter);
}

namespace {

ExperimentSpec tiny_spec() {
    SceneDims d;
    d.m_bs = 4;
    d.k_users = 16;
    d.n_ris = 8;
    d.t_slots = 16;
    d.t_pilot = 8;
    d.k_anchor = 8;
    ExperimentSpec spec;
    spec.variants = {{"", d}};
    spec.snr_grid_db = {20.0};
    spec.trials = 1;
    spec.base_seed = 5;
    spec.priors.h_b_prior = {0.3, 1.0 / 0.3};
    spec.priors.q_prior = {0.3, 1.0 / 0.3};
    return spec;
}

}  // namespace

TEST_CASE("run_experiment single trial equals a direct run") {
    const ExperimentSpec spec = tiny_spec();
    const ResultTable table = run_experiment(spec);
    CHECK(table.rows.size() == 6);  // 1 snr x 2 algorithms x 3 variables

    // reproduce the bamp row by hand
    const auto& variant = spec.variants[0];
    const auto seed = spec.base_seed;
    const RisConfig ris =
        build_ris_phases(variant.dims.n_ris, spec.ris_bits, seed ^ 0x9e3779b97f4a7c15ULL);
    const Scene sc = make_scene(variant.dims, spec.priors, ris, 20.0, seed);
    const RunReport rep = run_bamp(sc, spec.config);
    const Estimates aligned = align_estimates({rep.x_hat, rep.h_b_hat, rep.h_r_hat},
                                              sc.pilot_block(), sc.anchor_rows());
    const ResultRow* row = table.find(20.0, "bamp", "X");
    REQUIRE(row != nullptr);
    CHECK(row->nmse_db_mean == doctest::Approx(nmse_db(aligned.x_hat, sc.x)));
    CHECK(row->nmse_db_std == 0.0);
    CHECK(row->trials_used == 1);
}

TEST_CASE("run_experiment determinism and mean decomposition") {
    ExperimentSpec spec = tiny_spec();
    spec.trials = 4;
    const ResultTable a = run_experiment(spec);
    const ResultTable b = run_experiment(spec);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].nmse_db_mean == b.rows[i].nmse_db_mean);
        CHECK(a.rows[i].nmse_db_std == b.rows[i].nmse_db_std);
    }

    // two half-runs with the same per-trial seeds merge to the full mean
    ExperimentSpec first = spec, second = spec;
    first.trials = 2;
    second.trials = 2;
    second.base_seed = spec.base_seed + 2;
    const ResultTable ta = run_experiment(first);
    const ResultTable tb = run_experiment(second);
    const ResultRow* full = a.find(20.0, "bamp", "X");
    const ResultRow* ra = ta.find(20.0, "bamp", "X");
    const ResultRow* rb = tb.find(20.0, "bamp", "X");
    REQUIRE((full && ra && rb));
    CHECK(full->nmse_db_mean ==
          doctest::Approx(0.5 * (ra->nmse_db_mean + rb->nmse_db_mean)).epsilon(1e-12));
}

TEST_CASE("CSV round trip and header contract") {
    const ResultTable table = run_experiment(tiny_spec());
    std::stringstream ss;
    write_csv(table, ss);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "snr_db,algorithm,variable,nmse_db_mean,nmse_db_std,trials,divergent");
    ss.seekg(0);
    const ResultTable back = read_csv(ss);
    REQUIRE(back.rows.size() == table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        CHECK(back.rows[i].algorithm == table.rows[i].algorithm);
        CHECK(back.rows[i].variable == table.rows[i].variable);
        CHECK(back.rows[i].nmse_db_mean ==
              doctest::Approx(table.rows[i].nmse_db_mean).epsilon(1e-5));
    }
}

TEST_CASE("presets") {
    const ExperimentSpec fig3 = preset("fig3", PresetScale::paper);
    CHECK(fig3.variants[0].dims.t_pilot == 100);
    CHECK(fig3.variants[0].dims.m_bs == 100);
    CHECK(fig3.variants[0].dims.k_users == 500);
    CHECK(fig3.variants[0].dims.n_ris == 200);
    CHECK(fig3.variants[0].dims.k_anchor == 150);
    CHECK(fig3.config.damping == 0.3);
    CHECK(fig3.config.max_iters == 20);

    const ExperimentSpec fig4 = preset("fig4", PresetScale::paper);
    REQUIRE(fig4.variants.size() == 3);
    for (const auto& v : fig4.variants) {
        const double ratio =
            static_cast<double>(v.dims.t_pilot) / static_cast<double>(v.dims.t_slots);
        CHECK((std::abs(ratio - 0.3) < 1e-12 || std::abs(ratio - 1.0 / 3.0) < 1e-12 ||
               std::abs(ratio - 0.4) < 1e-12));
    }

    const ExperimentSpec desk = preset("fig3", PresetScale::desk);
    CHECK(desk.variants[0].dims.m_bs == 20);
    CHECK(desk.variants[0].dims.k_users == 100);
    CHECK(desk.variants[0].dims.t_slots == 40);
    CHECK(desk.variants[0].dims.n_ris == 40);
    CHECK(desk.variants[0].dims.t_pilot == 20);
    CHECK(desk.variants[0].dims.k_anchor == 30);
    CHECK(desk.trials == 50);

    const ExperimentSpec fig5 = preset("fig5", PresetScale::desk);
    REQUIRE(fig5.variants.size() == 3);
    const ExperimentSpec fig6 = preset("fig6", PresetScale::desk);
    REQUIRE(fig6.variants.size() == 3);

    try {
        preset("fig9", PresetScale::desk);
        FAIL("expected invalid_parameter");
    } catch (const invalid_parameter& e) {
        CHECK(std::string(e.what()).find("fig3") != std::string::npos);
    }
}

TEST_CASE("experiment config parsing") {
    std::stringstream ss(R"(# experiment
m = 4
k = 16
n = 8
t = 16
t_pilot = 8
k_anchor = 8
snr_grid = 0, 10, 20
trials = 2
base_seed = 7
algorithms = bamp, bigamp_ls
max_iters = 20
damping = 0.3
var_floor = 1e-12
inner_iters = 1
stop_tol = 1e-6
rho_b = 0.3
rho_q = 0.3
x_prior = gaussian
x_var = 1.0
ris_bits = 2
)");
    const auto cfg = ConfigFile::parse(ss);
    const ExperimentSpec spec = experiment_from_config(cfg);
    CHECK(spec.snr_grid_db.size() == 3);
    CHECK(spec.trials == 2);
    CHECK(spec.priors.h_b_prior.rho == 0.3);
    CHECK(spec.priors.h_b_prior.slab_var == doctest::Approx(1.0 / 0.3));
    CHECK(spec.algorithms.size() == 2);

    std::stringstream bad("m = x\n");
    const auto cfg_bad = ConfigFile::parse(bad);
    CHECK_THROWS_AS(cfg_bad.get_int("m"), config_error);
    std::stringstream noeq("just a line\n");
    CHECK_THROWS_AS(ConfigFile::parse(noeq), config_error);
}

TEST_CASE("divergence accounting is reported") {
    // an impossible configuration (T_p < M baseline requirement) makes the
    // baseline trial fail; failures count as divergent, never dropped
    ExperimentSpec spec = tiny_spec();
    spec.variants[0].dims.t_pilot = 2;
    spec.algorithms = {Algorithm::bigamp_ls};
    const ResultTable table = run_experiment(spec);
    const ResultRow* row = table.find(20.0, "bigamp_ls", "X");
    REQUIRE(row != nullptr);
    CHECK(row->divergent == 1);
    CHECK(row->trials_used == 0);
}
