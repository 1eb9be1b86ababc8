#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hetvar/oracles.hpp"
#include "hetvar/vb_engine.hpp"
#include "test_util.hpp"

using namespace hetvar;

TEST_CASE("initialization stays finite on degenerate inputs") {
    SUBCASE("response exactly linear in X, intercept-only variance design") {
        const int n = 30;
        DesignData d;
        d.X.resize(n, 2);
        d.X.col(0).setOnes();
        for (int i = 0; i < n; ++i) d.X(i, 1) = i;
        d.y = d.X * Eigen::Vector2d(1.0, 0.5);
        d.Z = MatrixXd::Ones(n, 1);
        d.mean_names = {"(intercept)", "x"};
        d.var_names = {"(intercept)"};
        const PriorSpec prior = PriorSpec::isotropic_prior(2, 1, 100.0, 100.0);
        const VariationalFit fit = init_fit(d, prior);
        CHECK(std::isfinite(fit.elbo));
        CHECK(fit.mu_alpha_q.allFinite());
    }
    SUBCASE("p > n takes the ridge path") {
        const auto inst = hetvar_tests::random_instance(6, 10, 2, 42);
        const PriorSpec prior = PriorSpec::isotropic_prior(10, 2, 10.0, 1.0);
        CHECK_NOTHROW(init_fit(inst.data, prior));
    }
    SUBCASE("homoscedastic data puts the initial alpha intercept near log sigma2") {
        Rng rng(8);
        const int n = 50;
        DesignData d;
        d.X.resize(n, 2);
        d.X.col(0).setOnes();
        for (int i = 0; i < n; ++i) {
            d.X(i, 1) = rng.normal();
            d.y.conservativeResize(n);
        }
        const double sigma = 1.7;
        for (int i = 0; i < n; ++i) d.y[i] = 2.0 + 0.5 * d.X(i, 1) + sigma * rng.normal();
        d.Z = MatrixXd::Ones(n, 1);
        d.mean_names = {"(intercept)", "x"};
        d.var_names = {"(intercept)"};
        const PriorSpec prior = PriorSpec::isotropic_prior(2, 1, 1000.0, 1000.0);
        const VariationalFit fit = init_fit(d, prior);
        // sampling noise of a log variance estimate is about sqrt(2/n) = 0.2
        CHECK(fit.mu_alpha_q[0] ==
              doctest::Approx(std::log(sigma * sigma)).epsilon(0.5));
    }
}

TEST_CASE("beta update recovers the prior with no data and OLS with flat priors") {
    SUBCASE("no data") {
        DesignData d;
        d.y.resize(0);
        d.X.resize(0, 2);
        d.Z.resize(0, 1);
        d.mean_names = {"a", "b"};
        d.var_names = {"z"};
        PriorSpec prior = PriorSpec::isotropic_prior(2, 1, 3.0, 1.0);
        prior.mu_beta0 << 1.0, -2.0;
        VariationalFit fit = hetvar_tests::prior_fit(prior);
        const auto [mu, sigma] = update_beta(d, prior, fit);
        CHECK((mu - prior.mu_beta0).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK((sigma - prior.Sigma_beta0).lpNorm<Eigen::Infinity>() < 1e-12);
    }
    SUBCASE("unit weights and flat prior match OLS") {
        const auto inst = hetvar_tests::random_instance(40, 3, 1, 17);
        PriorSpec prior = PriorSpec::isotropic_prior(3, 1, 1e8, 1.0);
        VariationalFit fit = hetvar_tests::prior_fit(prior);
        fit.mu_alpha_q.setZero();
        fit.Sigma_alpha_q = MatrixXd::Constant(1, 1, 1e-12);  // D = I
        const auto [mu, sigma] = update_beta(inst.data, prior, fit);
        const VectorXd ols = (inst.data.X.transpose() * inst.data.X)
                                 .ldlt()
                                 .solve(inst.data.X.transpose() * inst.data.y);
        CHECK((mu - ols).lpNorm<Eigen::Infinity>() <
              1e-5 * (1.0 + ols.lpNorm<Eigen::Infinity>()));
    }
    SUBCASE("update is a stationary point of the bound in mu_beta") {
        const auto inst = hetvar_tests::random_instance(25, 3, 2, 31);
        const PriorSpec prior = PriorSpec::isotropic_prior(3, 2, 4.0, 0.5);
        VariationalFit fit = init_fit(inst.data, prior);
        auto [mu, sigma] = update_beta(inst.data, prior, fit);
        fit.mu_beta_q = mu;
        fit.Sigma_beta_q = sigma;
        const VectorXd grad = oracle::finite_diff_grad(
            [&](const VectorXd& b) {
                VariationalFit f = fit;
                f.mu_beta_q = b;
                return elbo(inst.data, prior, f);
            },
            fit.mu_beta_q, 1e-5);
        CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-6);
    }
}

TEST_CASE("gamma-GLM Newton mode finding") {
    SolverConfig cfg;
    SUBCASE("intercept-only with constant responses lands on log c") {
        const int n = 20;
        const double c = 2.5;
        const MatrixXd z = MatrixXd::Ones(n, 1);
        const VectorXd w = VectorXd::Constant(n, c);
        const VectorXd mu0 = VectorXd::Zero(1);
        const MatrixXd s0 = MatrixXd::Constant(1, 1, 1e8);
        const auto res = newton_gamma_glm_mode(z, w, mu0, s0, VectorXd::Zero(1), cfg);
        CHECK(res.converged);
        CHECK(res.mode[0] == doctest::Approx(std::log(c)).epsilon(1e-6));
        CHECK(res.grad_inf_norm <= cfg.newton_tol);
    }
    SUBCASE("q = 1 mode matches a dense grid of the log density") {
        const auto inst = hetvar_tests::random_instance(30, 2, 1, 55);
        VariationalFit fit;
        fit.mu_beta_q = VectorXd::Zero(2);
        fit.Sigma_beta_q = 0.01 * MatrixXd::Identity(2, 2);
        fit.mu_alpha_q = VectorXd::Zero(1);
        fit.Sigma_alpha_q = MatrixXd::Identity(1, 1);
        const PseudoResponses pr = pseudo_responses(inst.data, fit);
        const VectorXd mu0 = VectorXd::Zero(1);
        const MatrixXd s0 = MatrixXd::Constant(1, 1, 4.0);
        const MatrixXd z1 = MatrixXd::Ones(30, 1);
        const auto res = newton_gamma_glm_mode(z1, pr.w, mu0, s0, VectorXd::Zero(1), cfg);
        const auto [argmax, fmax] = oracle::grid_max_1d(
            [&](double a) {
                double s = -0.5 * a * a / 4.0;
                for (int i = 0; i < 30; ++i)
                    s += -0.5 * a - 0.5 * pr.w[i] * std::exp(-a);
                return s;
            },
            res.mode[0] - 2.0, res.mode[0] + 2.0, 1e-4);
        CHECK(res.mode[0] == doctest::Approx(argmax).epsilon(1e-4));
    }
    SUBCASE("rejects non-positive responses") {
        const MatrixXd z = MatrixXd::Ones(3, 1);
        VectorXd w(3);
        w << 1.0, 0.0, 2.0;
        CHECK_THROWS_AS(newton_gamma_glm_mode(z, w, VectorXd::Zero(1),
                                              MatrixXd::Identity(1, 1), VectorXd::Zero(1), cfg),
                        SolverError);
    }
}

TEST_CASE("alpha update is guarded and prior-dominated in the small-variance limit") {
    const auto inst = hetvar_tests::random_instance(40, 2, 2, 66);
    const PriorSpec prior = PriorSpec::isotropic_prior(2, 2, 10.0, 1.0);
    SolverConfig cfg;

    SUBCASE("first update from initialization improves the bound") {
        VariationalFit fit = init_fit(inst.data, prior, cfg);
        auto [mu_b, sg_b] = update_beta(inst.data, prior, fit, cfg);
        fit.mu_beta_q = mu_b;
        fit.Sigma_beta_q = sg_b;
        const double before = elbo(inst.data, prior, fit, cfg);
        const AlphaUpdateResult up = update_alpha(inst.data, prior, fit, cfg);
        if (up.accepted) {
            VariationalFit after = fit;
            after.mu_alpha_q = up.mu_alpha_q;
            after.Sigma_alpha_q = up.Sigma_alpha_q;
            CHECK(elbo(inst.data, prior, after, cfg) > before);
        }
    }
    SUBCASE("at a fixed point the candidate is rejected") {
        SolverConfig tight = cfg;
        tight.elbo_tol = 1e-13;
        tight.max_outer_iters = 500;
        const FitResult res = fit_vb(inst.data, prior, tight);
        const AlphaUpdateResult up = update_alpha(inst.data, prior, res.fit, tight);
        CHECK_FALSE(up.accepted);
        CHECK((up.mu_alpha_q - res.fit.mu_alpha_q).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SUBCASE("near-degenerate prior pins the mode at the prior mean") {
        PriorSpec tight = PriorSpec::isotropic_prior(2, 2, 10.0, 1e-8);
        VariationalFit fit = init_fit(inst.data, tight, cfg);
        const AlphaUpdateResult up = update_alpha(inst.data, tight, fit, cfg);
        CHECK(up.mu_alpha_q.lpNorm<Eigen::Infinity>() < 1e-3);
    }
}

TEST_CASE("hyperparameter update formulas and bracketing") {
    PriorSpec prior = PriorSpec::isotropic_prior(2, 1, 1.0, 1.0, true);
    VariationalFit fit;
    fit.mu_beta_q.resize(2);
    fit.mu_alpha_q = VectorXd::Zero(1);
    fit.Sigma_alpha_q = MatrixXd::Identity(1, 1);

    SUBCASE("zero-fit limit") {
        fit.mu_beta_q.setZero();
        fit.Sigma_beta_q = 1e-12 * MatrixXd::Identity(2, 2);
        const auto [s2b, s2a] = update_hyper(fit, prior);
        CHECK(s2b == doctest::Approx(0.01 / (0.01 + 1.0 + 1.0)).epsilon(1e-9));
        (void)s2a;
    }
    SUBCASE("printed arithmetic") {
        fit.mu_beta_q << 1.0, 1.0;
        fit.Sigma_beta_q = MatrixXd::Identity(2, 2);  // trace 2
        const auto [s2b, s2a] = update_hyper(fit, prior);
        CHECK(s2b == doctest::Approx((0.01 + 1.0 + 1.0) / (0.01 + 1.0 + 1.0)).epsilon(1e-12));
        CHECK(s2b == doctest::Approx(1.0).epsilon(1e-12));
        (void)s2a;
    }
    SUBCASE("a scan of the penalized objective brackets the maximizer") {
        const auto inst = hetvar_tests::random_instance(30, 2, 1, 11);
        PriorSpec sp = PriorSpec::isotropic_prior(2, 1, 1.0, 1.0, true);
        const FitResult res = fit_vb(inst.data, sp, {});
        sp.set_isotropic_scales(res.sigma2_beta, res.sigma2_alpha);
        const auto [s2b_star, s2a_star] = update_hyper(res.fit, sp);
        auto penalized = [&](double s2b) {
            PriorSpec p2 = sp;
            p2.set_isotropic_scales(s2b, sp.isotropic->sigma2_alpha);
            const auto& iso = *p2.isotropic;
            const double lp = iso.a * std::log(iso.b) - std::lgamma(iso.a) -
                              (iso.a + 1.0) * std::log(s2b) - iso.b / s2b;
            return elbo(inst.data, p2, res.fit) + lp;
        };
        const double at = penalized(s2b_star);
        CHECK(at >= penalized(s2b_star * 0.9));
        CHECK(at >= penalized(s2b_star * 1.1));
        (void)s2a_star;
    }
    SUBCASE("shrink disabled is a contract violation") {
        PriorSpec off = PriorSpec::isotropic_prior(2, 1, 1.0, 1.0, false);
        CHECK_THROWS_AS(update_hyper(fit, off), SolverError);
    }
}

TEST_CASE("fit_vb is monotone, stationary at convergence, and deterministic") {
    SUBCASE("conjugate micro-instance with a pinned variance factor") {
        const auto inst = hetvar_tests::random_instance(25, 2, 1, 123);
        PriorSpec prior = PriorSpec::isotropic_prior(2, 1, 5.0, 1e-12);
        const FitResult res = fit_vb(inst.data, prior, {});
        // alpha is pinned at zero so the exact posterior mean is conjugate
        const MatrixXd a = inst.data.X.transpose() * inst.data.X +
                           MatrixXd::Identity(2, 2) / 5.0;
        const VectorXd mu_exact = a.ldlt().solve(inst.data.X.transpose() * inst.data.y);
        CHECK((res.fit.mu_beta_q - mu_exact).lpNorm<Eigen::Infinity>() < 1e-8);
    }
    SUBCASE("traces never decrease and converged fits are stationary") {
        for (int s = 0; s < 20; ++s) {
            const auto inst = hetvar_tests::random_instance(20 + 5 * s, 3, 3, 500 + s);
            const PriorSpec prior = PriorSpec::isotropic_prior(3, 3, 10.0, 1.0);
            const FitResult res = fit_vb(inst.data, prior, {});
            for (size_t i = 1; i < res.trace.objective_per_iteration.size(); ++i)
                CHECK(res.trace.objective_per_iteration[i] >=
                      res.trace.objective_per_iteration[i - 1]);
            REQUIRE(res.fit.converged);
            const VectorXd grad = oracle::finite_diff_grad(
                [&](const VectorXd& b) {
                    VariationalFit f = res.fit;
                    f.mu_beta_q = b;
                    return elbo(inst.data, prior, f);
                },
                res.fit.mu_beta_q, 1e-5);
            CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-5);
        }
    }
    SUBCASE("bit-identical across runs") {
        const auto inst = hetvar_tests::random_instance(40, 3, 2, 9001);
        const PriorSpec prior = PriorSpec::isotropic_prior(3, 2, 10.0, 1.0, true);
        const FitResult a = fit_vb(inst.data, prior, {});
        const FitResult b = fit_vb(inst.data, prior, {});
        CHECK(a.fit.elbo == b.fit.elbo);
        CHECK(a.fit.mu_beta_q == b.fit.mu_beta_q);
        CHECK(a.fit.Sigma_alpha_q == b.fit.Sigma_alpha_q);
        CHECK(a.sigma2_beta == b.sigma2_beta);
    }
    SUBCASE("newton statistics sink records engine calls") {
        NewtonStats stats;
        SolverConfig cfg;
        cfg.newton_stats = &stats;
        const auto inst = hetvar_tests::random_instance(30, 2, 2, 321);
        const PriorSpec prior = PriorSpec::isotropic_prior(2, 2, 10.0, 1.0);
        fit_vb(inst.data, prior, cfg);
        CHECK(stats.calls > 0);
        CHECK(stats.max_final_grad <= cfg.newton_tol);
    }
}
