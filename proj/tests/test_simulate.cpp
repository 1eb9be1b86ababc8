#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hetvar/metrics.hpp"
#include "hetvar/simulate.hpp"
#include "test_util.hpp"

using namespace hetvar;

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

SimulationSpec small_p_spec() {
    SimulationSpec spec;
    spec.beta_tilde.resize(8);
    spec.beta_tilde << 3, 1.5, 0, 0, 2, 0, 0, 0;
    spec.alpha_tilde.resize(8);
    spec.alpha_tilde << 0, 3, 0, 0, -3, 0, 0, 0;
    spec.sigma = 0.5;
    return spec;
}
}  // namespace

TEST_CASE("simulate_hetero honors the generator equation") {
    SUBCASE("alpha = 0, sigma = 1 leaves unit residual noise") {
        SimulationSpec spec;
        spec.beta_tilde = VectorXd::Zero(4);
        spec.beta_tilde << 1.0, -0.5, 0.0, 0.25;
        spec.alpha_tilde = VectorXd::Zero(4);
        spec.sigma = 1.0;
        spec.n_train = 40000;
        spec.n_valid = 0;
        const SimulatedData sim = simulate_hetero(spec, 5);
        VectorXd resid = sim.train.y;
        resid -= VectorXd::Constant(sim.train.n(), spec.intercept_mean);
        for (int j = 0; j < 4; ++j)
            resid -= sim.train.X.col(j + 1) * spec.beta_tilde[j];
        const double var = resid.squaredNorm() / sim.train.n();
        CHECK(std::abs(var - 1.0) < 3.0 / std::sqrt((double)sim.train.n()));
    }
    SUBCASE("heteroscedastic noise has the advertised local scale") {
        SimulationSpec spec = small_p_spec();
        spec.n_train = 100000;
        spec.n_valid = 0;
        const SimulatedData sim = simulate_hetero(spec, 17);
        // standardize each residual by its true sd; the result must be unit variance
        double acc = 0.0;
        for (int i = 0; i < sim.train.n(); ++i) {
            double loc = spec.intercept_mean;
            double la = 0.0;
            for (int j = 0; j < 8; ++j) {
                loc += sim.train.X(i, j + 1) * spec.beta_tilde[j];
                la += sim.train.X(i, j + 1) * spec.alpha_tilde[j];
            }
            const double z = (sim.train.y[i] - loc) / (spec.sigma * std::exp(0.5 * la));
            acc += z * z;
        }
        const double var = acc / sim.train.n();
        CHECK(std::abs(var - 1.0) < 3.0 / std::sqrt((double)sim.train.n()));
    }
    SUBCASE("truth records the nonzero coordinates plus intercepts") {
        const SimulatedData sim = simulate_hetero(small_p_spec(), 3);
        CHECK(sim.truth.mean_active == std::vector<int>{0, 1, 2, 5});
        CHECK(sim.truth.var_active == std::vector<int>{0, 2, 5});
    }
    SUBCASE("pre-transform predictors carry the lag-1 correlation") {
        SimulationSpec spec = small_p_spec();
        spec.transform_to_unit = false;
        spec.n_train = 50000;
        spec.n_valid = 0;
        const SimulatedData sim = simulate_hetero(spec, 29);
        for (int j = 1; j < 8; ++j) {
            const VectorXd a = sim.train.X.col(j);
            const VectorXd b = sim.train.X.col(j + 1);
            const double corr = (a.array() - a.mean()).cwiseProduct(b.array() - b.mean()).sum() /
                                std::sqrt((a.array() - a.mean()).square().sum() *
                                          (b.array() - b.mean()).square().sum());
            CHECK(std::abs(corr - 0.5) < 3.0 / std::sqrt((double)sim.train.n()));
        }
    }
    SUBCASE("transformed predictors live in the unit interval") {
        const SimulatedData sim = simulate_hetero(small_p_spec(), 101);
        CHECK(sim.train.X.rightCols(8).minCoeff() > 0.0);
        CHECK(sim.train.X.rightCols(8).maxCoeff() < 1.0);
    }
    SUBCASE("deterministic given the seed") {
        const SimulatedData a = simulate_hetero(small_p_spec(), 7);
        const SimulatedData b = simulate_hetero(small_p_spec(), 7);
        CHECK(a.train.y == b.train.y);
        CHECK(a.valid.X == b.valid.X);
    }
}

TEST_CASE("mse and pps") {
    VectorXd y(3);
    y << 1.0, 2.0, 3.0;
    SUBCASE("exact predictions give zero") { CHECK(mse(y, y) == 0.0); }
    SUBCASE("unit offset gives one") {
        const VectorXd yhat = y.array() + 1.0;
        CHECK(mse(yhat, y) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("seeded vectors match a direct recomputation") {
        Rng rng(88);
        VectorXd a(50), b(50);
        for (int i = 0; i < 50; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
        }
        double acc = 0.0;
        for (int i = 0; i < 50; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        CHECK(mse(a, b) == doctest::Approx(acc / 50).epsilon(1e-14));
    }
    SUBCASE("length mismatch rejected") {
        VectorXd b(2);
        b << 1, 2;
        CHECK_THROWS_AS(mse(y, b), DataError);
    }

    SUBCASE("standard normal point value") {
        DesignData d;
        d.y = VectorXd::Zero(1);
        d.X = MatrixXd::Ones(1, 1);
        d.Z = MatrixXd::Ones(1, 1);
        d.mean_names = {"(intercept)"};
        d.var_names = {"(intercept)"};
        VariationalFit fit;
        fit.mu_beta_q = VectorXd::Zero(1);
        fit.Sigma_beta_q = MatrixXd::Zero(1, 1);
        fit.mu_alpha_q = VectorXd::Zero(1);
        fit.Sigma_alpha_q = MatrixXd::Zero(1, 1);
        CHECK(pps(fit, d) == doctest::Approx(0.5 * kLog2Pi).epsilon(1e-9));
    }
    SUBCASE("location-scale shift moves pps by log sigma") {
        Rng rng(4);
        const int n = 200;
        DesignData d;
        d.y.resize(n);
        for (int i = 0; i < n; ++i) d.y[i] = rng.normal();
        d.X = MatrixXd::Ones(n, 1);
        d.Z = MatrixXd::Ones(n, 1);
        d.mean_names = {"(intercept)"};
        d.var_names = {"(intercept)"};
        VariationalFit fit;
        fit.mu_beta_q = VectorXd::Zero(1);
        fit.Sigma_beta_q = MatrixXd::Zero(1, 1);
        fit.mu_alpha_q = VectorXd::Zero(1);
        fit.Sigma_alpha_q = MatrixXd::Zero(1, 1);
        const double base = pps(fit, d);

        const double scale = 2.5;
        DesignData d2 = d;
        d2.y *= scale;
        VariationalFit fit2 = fit;
        fit2.mu_alpha_q[0] = 2.0 * std::log(scale);
        CHECK(pps(fit2, d2) == doctest::Approx(base + std::log(scale)).epsilon(1e-10));

        SUBCASE("sample average near the standard normal entropy") {
            CHECK(std::abs(base - (0.5 * kLog2Pi + 0.5)) < 3.0 / std::sqrt((double)n));
        }
    }
}

TEST_CASE("classify_fit counts support recovery and zero coefficients") {
    const SimulatedData sim = simulate_hetero(small_p_spec(), 404);
    SUBCASE("selected equals truth") {
        const FitClassification c = classify_fit(sim.truth, sim.truth, sim.train);
        CHECK(c.correct_mean);
        CHECK(c.correct_var);
        CHECK(c.nzc_mean == 8 - 3);
        CHECK(c.nzc_var == 8 - 2);
    }
    SUBCASE("one extra noise predictor breaks exact recovery") {
        ModelIndex sel = sim.truth;
        sel.mean_active.push_back(3);
        const FitClassification c = classify_fit(sel, sim.truth, sim.train);
        CHECK_FALSE(c.correct_mean);
        CHECK(c.correct_var);
        CHECK(c.nzc_mean == 8 - 4);
    }
}

TEST_CASE("replicate_study aggregates deterministically") {
    SimulationSpec spec = small_p_spec();
    spec.n_train = 120;
    spec.n_valid = 120;
    SelectionConfig cfg;
    cfg.policy.kind = ModelPriorKind::ebic;
    cfg.restricted = true;
    cfg.shrink = true;

    SUBCASE("R = 1 equals the single replication with zero spread") {
        const StudySummary s = replicate_study(spec, 1, cfg, 99);
        CHECK(s.replications == 1);
        CHECK(s.rows.size() == 1);
        CHECK(s.mse == s.rows[0].mse);
        CHECK(s.sd_mse == 0.0);
    }
    SUBCASE("same master seed twice gives identical summaries") {
        const StudySummary a = replicate_study(spec, 4, cfg, 7);
        const StudySummary b = replicate_study(spec, 4, cfg, 7);
        CHECK(a.mse == b.mse);
        CHECK(a.pps == b.pps);
        CHECK(a.cfr_mean == b.cfr_mean);
        for (int r = 0; r < 4; ++r) CHECK(a.rows[r].seed == b.rows[r].seed);
    }
    SUBCASE("threaded execution matches the sequential result exactly") {
        const StudySummary a = replicate_study(spec, 6, cfg, 11, 1);
        const StudySummary b = replicate_study(spec, 6, cfg, 11, 3);
        CHECK(a.mse == b.mse);
        CHECK(a.pps == b.pps);
        for (int r = 0; r < 6; ++r) {
            CHECK(a.rows[r].mse == b.rows[r].mse);
            CHECK(a.rows[r].nzc_mean == b.rows[r].nzc_mean);
        }
    }
}
