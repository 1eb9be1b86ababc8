#include "hetvar/homoscedastic.hpp"

#include <cmath>

#include "hetvar/lower_bound.hpp"

namespace hetvar::homo {

namespace {

double scalar_newton_mode(double v, double prior_var, int n, double start,
                          double newton_tol) {
    double a = start;
    auto objective = [&](double x) {
        return -0.5 * n * x - 0.5 * v * std::exp(-x) - 0.5 * x * x / prior_var;
    };
    double f = objective(a);
    for (int it = 0; it < 100; ++it) {
        const double e = v * std::exp(-a);
        const double g = -0.5 * n + 0.5 * e - a / prior_var;
        if (std::abs(g) <= newton_tol) break;
        const double h = -0.5 * e - 1.0 / prior_var;
        const double step = -g / h;
        if (0.5 * g * step < 1e-12 * (1.0 + std::abs(f))) {
            a += step;
            f = objective(a);
        } else {
            double t = 1.0;
            while (objective(a + t * step) < f && t > 1e-8) t *= 0.5;
            a += t * step;
            f = objective(a);
        }
    }
    return a;
}

}  // namespace

ScalarAlphaFactor update_alpha_scalar(double v, double prior_var, int n, bool refine,
                                      double newton_tol) {
    if (v <= 0.0 || prior_var <= 0.0 || n < 1)
        throw SolverError("update_alpha_scalar expects v > 0, prior_var > 0, n >= 1");
    ScalarAlphaFactor f;
    f.prior_var = prior_var;
    f.mu_alpha_q = (v - n) / (v + 2.0 / prior_var);
    if (refine) f.mu_alpha_q = scalar_newton_mode(v, prior_var, n, f.mu_alpha_q, newton_tol);
    f.var_alpha_q = 1.0 / (0.5 * v * std::exp(-f.mu_alpha_q) + 1.0 / prior_var);
    return f;
}

ScalarAlphaFactor update_alpha_scalar_block(double v, double prior_var, int n,
                                            double newton_tol) {
    ScalarAlphaFactor f = update_alpha_scalar(v, prior_var, n, true, newton_tol);
    for (int round = 0; round < 100; ++round) {
        const double adjusted = v * std::exp(0.5 * f.var_alpha_q);
        const double mu = scalar_newton_mode(adjusted, prior_var, n, f.mu_alpha_q, newton_tol);
        const double var = 1.0 / (0.5 * adjusted * std::exp(-mu) + 1.0 / prior_var);
        const double dm = std::abs(mu - f.mu_alpha_q), dv = std::abs(var - f.var_alpha_q);
        f.mu_alpha_q = mu;
        f.var_alpha_q = var;
        if (dm < 1e-13 && dv < 1e-13) break;
    }
    return f;
}

HomoRankScore rank_mean_add_homo(const VectorXd& xj, const VectorXd& residuals,
                                 double denom, double sigma2_beta, int n) {
    const double ss = xj.squaredNorm();
    if (std::abs(ss - static_cast<double>(n)) > 1e-6 * n)
        throw SolverError("homoscedastic ranking requires a unit-sum-of-squares design column");
    HomoRankScore s;
    s.correlation_stat = std::abs(xj.dot(residuals));
    const double precision = 1.0 / sigma2_beta + ss / denom;
    s.candidate_mu = (xj.dot(residuals) / denom) / precision;
    s.candidate_var = 1.0 / precision;
    s.bound_delta = 0.5 * std::log(s.candidate_var / sigma2_beta) +
                    0.5 * s.candidate_mu * s.candidate_mu / s.candidate_var;
    return s;
}

FitResult fit_vb_homo(const DesignData& data, const PriorSpec& prior,
                      const SolverConfig& config) {
    if (data.q() != 1 || (data.Z.col(0).array() - 1.0).abs().maxCoeff() > 0.0)
        throw SolverError("homoscedastic fit requires an intercept-only variance design");
    PriorSpec cur_prior = prior;
    cur_prior.check(data.p(), 1);
    const bool shrink = cur_prior.isotropic && cur_prior.isotropic->shrink;
    const int n = data.n(), p = data.p();

    auto solve_beta = [&](double mu_a, double var_a) {
        const double dweight = std::exp(clip(-(mu_a - 0.5 * var_a), config.exponent_clip));
        const auto prior_llt = cholesky_spd(cur_prior.Sigma_beta0, config.jitter, "Sigma_beta0");
        const MatrixXd a = dweight * (data.X.transpose() * data.X).eval() +
                           prior_llt.solve(MatrixXd::Identity(p, p));
        const auto llt = cholesky_spd(a, config.jitter, "beta normal equations");
        return std::pair<VectorXd, MatrixXd>{
            llt.solve(dweight * (data.X.transpose() * data.y) +
                      prior_llt.solve(cur_prior.mu_beta0)),
            llt.solve(MatrixXd::Identity(p, p))};
    };
    auto pseudo_sum = [&](const VectorXd& mu_b, const MatrixXd& sigma_b) {
        const VectorXd resid = data.y - data.X * mu_b;
        return resid.squaredNorm() + row_quadratic(data.X, sigma_b).sum();
    };
    auto to_fit = [&](const VectorXd& mu_b, const MatrixXd& sigma_b, double mu_a,
                      double var_a) {
        VariationalFit f;
        f.mu_beta_q = mu_b;
        f.Sigma_beta_q = sigma_b;
        f.mu_alpha_q = VectorXd::Constant(1, mu_a);
        f.Sigma_alpha_q = MatrixXd::Constant(1, 1, var_a);
        return f;
    };

    auto prior_var = [&] { return cur_prior.Sigma_alpha0(0, 0); };
    const double ridge = config.init_ridge * std::max(n, 1);
    const MatrixXd xtx = data.X.transpose() * data.X + ridge * MatrixXd::Identity(p, p);
    VectorXd mu_b =
        cholesky_spd(xtx, config.jitter, "init mean solve").solve(data.X.transpose() * data.y);
    double v = std::max((data.y - data.X * mu_b).squaredNorm(),
                        config.residual_floor * n);
    ScalarAlphaFactor af =
        config.alpha_update == AlphaUpdate::block
            ? update_alpha_scalar_block(v, prior_var(), n, config.newton_tol)
            : update_alpha_scalar(v, prior_var(), n, true, config.newton_tol);
    MatrixXd sigma_b;

    FitResult out;
    double objective_prev = -std::numeric_limits<double>::infinity();
    VariationalFit fit;
    for (int it = 1; it <= config.max_outer_iters; ++it) {
        std::tie(mu_b, sigma_b) = solve_beta(af.mu_alpha_q, af.var_alpha_q);
        v = pseudo_sum(mu_b, sigma_b);
        ScalarAlphaFactor cand =
            config.alpha_update == AlphaUpdate::block
                ? update_alpha_scalar_block(v, prior_var(), n, config.newton_tol)
                : update_alpha_scalar(v, prior_var(), n, true, config.newton_tol);
        const double l_new =
            elbo(data, cur_prior, to_fit(mu_b, sigma_b, cand.mu_alpha_q, cand.var_alpha_q),
                 config);
        const double l_old =
            elbo(data, cur_prior, to_fit(mu_b, sigma_b, af.mu_alpha_q, af.var_alpha_q),
                 config);
        const bool accepted = l_new > l_old;
        if (accepted) af = cand;
        out.trace.alpha_update_accepted.push_back(accepted);
        fit = to_fit(mu_b, sigma_b, af.mu_alpha_q, af.var_alpha_q);
        fit.elbo = accepted ? l_new : l_old;

        double objective = fit.elbo;
        if (shrink) {
            auto [s2b, s2a] = update_hyper(fit, cur_prior);
            cur_prior.set_isotropic_scales(s2b, s2a);
            out.trace.hyper_values.emplace_back(s2b, s2a);
            fit.elbo = elbo(data, cur_prior, fit, config);
            const auto& iso = *cur_prior.isotropic;
            auto lig = [&](double x) {
                return iso.a * std::log(iso.b) - std::lgamma(iso.a) -
                       (iso.a + 1.0) * std::log(x) - iso.b / x;
            };
            objective = fit.elbo + lig(iso.sigma2_beta) + lig(iso.sigma2_alpha);
        }
        out.trace.elbo_per_iteration.push_back(fit.elbo);
        out.trace.objective_per_iteration.push_back(objective);
        fit.iterations = it;
        if (it > 1 && objective - objective_prev < config.elbo_tol) {
            fit.converged = true;
            break;
        }
        objective_prev = objective;
    }
    // final mean-block refresh against the settled variance factor
    std::tie(mu_b, sigma_b) = solve_beta(af.mu_alpha_q, af.var_alpha_q);
    {
        const bool conv = fit.converged;
        const int its = fit.iterations;
        fit = to_fit(mu_b, sigma_b, af.mu_alpha_q, af.var_alpha_q);
        fit.converged = conv;
        fit.iterations = its;
        fit.elbo = elbo(data, cur_prior, fit, config);
    }
    out.fit = std::move(fit);
    out.sigma2_beta = cur_prior.isotropic ? cur_prior.isotropic->sigma2_beta : 0.0;
    out.sigma2_alpha = cur_prior.isotropic ? cur_prior.isotropic->sigma2_alpha : 0.0;
    return out;
}

}  // namespace hetvar::homo
