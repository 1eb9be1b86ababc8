#include "hetvar/vb_engine.hpp"

#include <cmath>

#include "hetvar/homoscedastic.hpp"

namespace hetvar {

namespace {

double log_ig_density(double x, double a, double b) {
    return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

double hyper_log_prior(const PriorSpec& prior) {
    if (!prior.isotropic || !prior.isotropic->shrink) return 0.0;
    const auto& iso = *prior.isotropic;
    return log_ig_density(iso.sigma2_beta, iso.a, iso.b) +
           log_ig_density(iso.sigma2_alpha, iso.a, iso.b);
}

// Inverse of diag(exp(z_i'mu - z_i'S z_i / 2)) as a vector of weights.
VectorXd beta_step_weights(const DesignData& data, const VariationalFit& fit,
                           const SolverConfig& config) {
    const VectorXd expo = variance_exponents(data.Z, fit.mu_alpha_q, fit.Sigma_alpha_q,
                                             config.exponent_clip);
    return (-expo.array()).exp();
}

double glm_log_posterior(const MatrixXd& Z, const VectorXd& w, const VectorXd& mu0,
                         const Eigen::LLT<MatrixXd>& prior_llt, const VectorXd& a,
                         double clip_at) {
    const VectorXd za = Z * a;
    double s = 0.0;
    for (int i = 0; i < za.size(); ++i)
        s += -0.5 * za[i] - 0.5 * w[i] * std::exp(clip(-za[i], clip_at));
    const VectorXd d = a - mu0;
    return s - 0.5 * d.dot(prior_llt.solve(d));
}

}  // namespace

PseudoResponses pseudo_responses(const DesignData& data, const VariationalFit& fit,
                                 const SolverConfig& config) {
    PseudoResponses pr;
    const VectorXd resid = data.y - data.X * fit.mu_beta_q;
    pr.w = resid.array().square().matrix() + row_quadratic(data.X, fit.Sigma_beta_q);
    pr.w = pr.w.cwiseMax(1e-300);
    const VectorXd expo = variance_exponents(data.Z, fit.mu_alpha_q, fit.Sigma_alpha_q,
                                             config.exponent_clip);
    pr.v = (pr.w.array() * (-expo.array()).exp()).matrix();
    return pr;
}

NewtonResult newton_gamma_glm_mode(const MatrixXd& Z, const VectorXd& w,
                                   const VectorXd& mu_alpha0, const MatrixXd& Sigma_alpha0,
                                   const VectorXd& start, const SolverConfig& config) {
    if ((w.array() <= 0.0).any()) throw SolverError("gamma-GLM responses must be positive");
    const auto prior_llt = cholesky_spd(Sigma_alpha0, config.jitter, "Sigma_alpha0");
    const MatrixXd prior_inv = prior_llt.solve(MatrixXd::Identity(Z.cols(), Z.cols()));
    const VectorXd half_col_sums = 0.5 * Z.colwise().sum();

    NewtonResult res;
    res.mode = start;
    double f = glm_log_posterior(Z, w, mu_alpha0, prior_llt, res.mode, config.exponent_clip);
    for (int it = 0; it < config.newton_max_iters; ++it) {
        VectorXd wa(w.size());
        for (int i = 0; i < w.size(); ++i)
            wa[i] = 0.5 * w[i] * std::exp(clip(-(Z.row(i) * res.mode)(0), config.exponent_clip));
        const VectorXd grad =
            -half_col_sums + Z.transpose() * wa - prior_inv * (res.mode - mu_alpha0);
        res.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
        if (res.grad_inf_norm <= config.newton_tol) {
            res.converged = true;
            break;
        }
        const MatrixXd curvature = Z.transpose() * wa.asDiagonal() * Z + prior_inv;
        const VectorXd step =
            cholesky_spd(curvature, config.jitter, "Newton curvature").solve(grad);
        // Near the mode the predicted gain falls below double precision and
        // an objective-based line search only sees rounding noise; take the
        // plain Newton step there.
        const double predicted_gain = 0.5 * grad.dot(step);
        if (predicted_gain < 1e-12 * (1.0 + std::abs(f))) {
            res.mode += step;
            f = glm_log_posterior(Z, w, mu_alpha0, prior_llt, res.mode, config.exponent_clip);
        } else {
            double t = 1.0;
            VectorXd trial = res.mode + step;
            double ft = glm_log_posterior(Z, w, mu_alpha0, prior_llt, trial,
                                          config.exponent_clip);
            while (ft < f && t > 1e-8) {
                t *= 0.5;
                trial = res.mode + t * step;
                ft = glm_log_posterior(Z, w, mu_alpha0, prior_llt, trial,
                                       config.exponent_clip);
            }
            res.mode = trial;
            f = ft;
        }
        ++res.iterations;
    }
    if (config.newton_stats) config.newton_stats->record(res.iterations, res.grad_inf_norm);
    return res;
}

std::pair<VectorXd, MatrixXd> update_beta(const DesignData& data, const PriorSpec& prior,
                                          const VariationalFit& fit,
                                          const SolverConfig& config) {
    const auto prior_llt = cholesky_spd(prior.Sigma_beta0, config.jitter, "Sigma_beta0");
    const MatrixXd prior_inv = prior_llt.solve(MatrixXd::Identity(data.p(), data.p()));
    MatrixXd a = prior_inv;
    VectorXd b = prior_inv * prior.mu_beta0;
    if (data.n() > 0) {
        const VectorXd d = beta_step_weights(data, fit, config);
        a += data.X.transpose() * d.asDiagonal() * data.X;
        b += data.X.transpose() * (d.asDiagonal() * data.y);
    }
    const auto llt = cholesky_spd(a, config.jitter, "beta normal equations");
    return {llt.solve(b), llt.solve(MatrixXd::Identity(data.p(), data.p()))};
}

namespace {

// One mode + Laplace pair for given responses.
std::pair<VectorXd, MatrixXd> mode_laplace_pair(const MatrixXd& Z, const VectorXd& w,
                                                const PriorSpec& prior, const VectorXd& start,
                                                const SolverConfig& config) {
    const auto res = newton_gamma_glm_mode(Z, w, prior.mu_alpha0, prior.Sigma_alpha0,
                                           start, config);
    VectorXd wa(w.size());
    for (int i = 0; i < w.size(); ++i)
        wa[i] = 0.5 * w[i] * std::exp(clip(-(Z.row(i) * res.mode)(0), config.exponent_clip));
    const auto prior_llt = cholesky_spd(prior.Sigma_alpha0, config.jitter, "Sigma_alpha0");
    const MatrixXd prior_inv = prior_llt.solve(MatrixXd::Identity(Z.cols(), Z.cols()));
    const MatrixXd curvature = Z.transpose() * wa.asDiagonal() * Z + prior_inv;
    MatrixXd sigma = cholesky_spd(curvature, config.jitter, "alpha Laplace curvature")
                         .solve(MatrixXd::Identity(Z.cols(), Z.cols()));
    return {res.mode, std::move(sigma)};
}

// Fixed point of the bound's alpha block: the mode sees curvature-adjusted
// responses w_i exp(z_i'S z_i / 2), and S is the matching Laplace covariance.
std::pair<VectorXd, MatrixXd> alpha_block_pair(const MatrixXd& Z, const VectorXd& w,
                                               const PriorSpec& prior, const VectorXd& start,
                                               const MatrixXd& sigma_start,
                                               const SolverConfig& config) {
    VectorXd mu = start;
    MatrixXd sigma = sigma_start;
    for (int round = 0; round < 100; ++round) {
        VectorXd adjusted(w.size());
        const VectorXd half_quad = 0.5 * row_quadratic(Z, sigma);
        for (int i = 0; i < w.size(); ++i)
            adjusted[i] = w[i] * std::exp(clip(half_quad[i], config.exponent_clip));
        auto [mu_new, sigma_new] = mode_laplace_pair(Z, adjusted, prior, mu, config);
        const double dmu = (mu_new - mu).lpNorm<Eigen::Infinity>();
        const double dsg = (sigma_new - sigma).lpNorm<Eigen::Infinity>();
        mu = std::move(mu_new);
        sigma = std::move(sigma_new);
        if (dmu < 1e-11 && dsg < 1e-11) break;
    }
    return {std::move(mu), std::move(sigma)};
}

}  // namespace

AlphaUpdateResult update_alpha(const DesignData& data, const PriorSpec& prior,
                               const VariationalFit& fit, const SolverConfig& config) {
    const PseudoResponses pr = pseudo_responses(data, fit, config);
    auto [mu, sigma] = config.alpha_update == AlphaUpdate::block
                           ? alpha_block_pair(data.Z, pr.w, prior, fit.mu_alpha_q,
                                              fit.Sigma_alpha_q, config)
                           : mode_laplace_pair(data.Z, pr.w, prior, fit.mu_alpha_q, config);
    VariationalFit cand = fit;
    cand.mu_alpha_q = mu;
    cand.Sigma_alpha_q = sigma;
    AlphaUpdateResult out{std::move(mu), std::move(sigma), false};
    const double l_new = elbo(data, prior, cand, config);
    const double l_old = elbo(data, prior, fit, config);
    if (l_new > l_old) {
        out.accepted = true;
    } else {
        out.mu_alpha_q = fit.mu_alpha_q;
        out.Sigma_alpha_q = fit.Sigma_alpha_q;
    }
    return out;
}

std::pair<double, double> update_hyper(const VariationalFit& fit, const PriorSpec& prior) {
    if (!prior.isotropic || !prior.isotropic->shrink)
        throw SolverError("update_hyper requires an isotropic prior with shrink enabled");
    const auto& iso = *prior.isotropic;
    const double p = static_cast<double>(fit.mu_beta_q.size());
    const double q = static_cast<double>(fit.mu_alpha_q.size());
    const double s2b = (iso.b + 0.5 * fit.mu_beta_q.squaredNorm() +
                        0.5 * fit.Sigma_beta_q.trace()) /
                       (iso.a + 1.0 + p / 2.0);
    const double s2a = (iso.b + 0.5 * fit.mu_alpha_q.squaredNorm() +
                        0.5 * fit.Sigma_alpha_q.trace()) /
                       (iso.a + 1.0 + q / 2.0);
    return {s2b, s2a};
}

VariationalFit init_fit(const DesignData& data, const PriorSpec& prior,
                        const SolverConfig& config) {
    const int n = data.n(), p = data.p(), q = data.q();
    prior.check(p, q);
    VariationalFit fit;
    if (n == 0) {
        fit.mu_beta_q = prior.mu_beta0;
        fit.Sigma_beta_q = prior.Sigma_beta0;
        fit.mu_alpha_q = prior.mu_alpha0;
        fit.Sigma_alpha_q = prior.Sigma_alpha0;
        fit.elbo = elbo(data, prior, fit, config);
        return fit;
    }
    const double ridge = config.init_ridge * n;
    const MatrixXd xtx =
        data.X.transpose() * data.X + ridge * MatrixXd::Identity(p, p);
    const VectorXd beta_hat =
        cholesky_spd(xtx, config.jitter, "init mean solve").solve(data.X.transpose() * data.y);

    VectorXd log_r2(n);
    for (int i = 0; i < n; ++i) {
        const double r = data.y[i] - data.X.row(i) * beta_hat;
        log_r2[i] = std::log(std::max(r * r, config.residual_floor));
    }
    const MatrixXd ztz =
        data.Z.transpose() * data.Z + ridge * MatrixXd::Identity(q, q);
    const auto ztz_llt = cholesky_spd(ztz, config.jitter, "init variance solve");
    const VectorXd alpha_hat = ztz_llt.solve(data.Z.transpose() * log_r2);
    const double s2_resid =
        (log_r2 - data.Z * alpha_hat).squaredNorm() / std::max(n - q, 1);
    const MatrixXd sigma_alpha_ls =
        s2_resid * ztz_llt.solve(MatrixXd::Identity(q, q));

    // One alpha pass on the floored squared residuals calibrates the factor
    // before the first sweep.
    VectorXd w0(n);
    for (int i = 0; i < n; ++i) w0[i] = std::exp(log_r2[i]);
    if (config.alpha_update == AlphaUpdate::block) {
        auto [mu, sigma] = alpha_block_pair(data.Z, w0, prior, alpha_hat,
                                            sigma_alpha_ls, config);
        fit.mu_alpha_q = std::move(mu);
        fit.Sigma_alpha_q = std::move(sigma);
    } else {
        auto [mu, sigma] = mode_laplace_pair(data.Z, w0, prior, alpha_hat, config);
        fit.mu_alpha_q = std::move(mu);
        fit.Sigma_alpha_q = std::move(sigma);
    }

    fit.mu_beta_q = beta_hat;
    const VectorXd d = beta_step_weights(data, fit, config);
    const auto prior_llt = cholesky_spd(prior.Sigma_beta0, config.jitter, "Sigma_beta0");
    const MatrixXd a = data.X.transpose() * d.asDiagonal() * data.X +
                       prior_llt.solve(MatrixXd::Identity(p, p));
    fit.Sigma_beta_q =
        cholesky_spd(a, config.jitter, "init Sigma_beta").solve(MatrixXd::Identity(p, p));
    fit.elbo = elbo(data, prior, fit, config);
    return fit;
}

FitResult fit_vb(const DesignData& data, const PriorSpec& prior, const SolverConfig& config) {
    if (config.homoscedastic) return homo::fit_vb_homo(data, prior, config);

    PriorSpec cur_prior = prior;
    cur_prior.check(data.p(), data.q());
    const bool shrink = cur_prior.isotropic && cur_prior.isotropic->shrink;

    FitResult out;
    VariationalFit fit = init_fit(data, cur_prior, config);
    double objective_prev = -std::numeric_limits<double>::infinity();

    for (int it = 1; it <= config.max_outer_iters; ++it) {
        auto [mu_b, sigma_b] = update_beta(data, cur_prior, fit, config);
        fit.mu_beta_q = std::move(mu_b);
        fit.Sigma_beta_q = std::move(sigma_b);

        const AlphaUpdateResult alpha = update_alpha(data, cur_prior, fit, config);
        fit.mu_alpha_q = alpha.mu_alpha_q;
        fit.Sigma_alpha_q = alpha.Sigma_alpha_q;
        out.trace.alpha_update_accepted.push_back(alpha.accepted);

        if (shrink) {
            auto [s2b, s2a] = update_hyper(fit, cur_prior);
            cur_prior.set_isotropic_scales(s2b, s2a);
            out.trace.hyper_values.emplace_back(s2b, s2a);
        }

        fit.elbo = elbo(data, cur_prior, fit, config);
        const double objective = fit.elbo + hyper_log_prior(cur_prior);
        out.trace.elbo_per_iteration.push_back(fit.elbo);
        out.trace.objective_per_iteration.push_back(objective);
        fit.iterations = it;

        if (it > 1 && objective - objective_prev < config.elbo_tol) {
            fit.converged = true;
            break;
        }
        objective_prev = objective;
    }
    // Refresh the mean block against the final variance factor so the
    // returned fit is exactly stationary in mu_beta. Exact block maximizer,
    // so the bound cannot decrease.
    {
        auto [mu_b, sigma_b] = update_beta(data, cur_prior, fit, config);
        fit.mu_beta_q = std::move(mu_b);
        fit.Sigma_beta_q = std::move(sigma_b);
        fit.elbo = elbo(data, cur_prior, fit, config);
    }
    out.fit = std::move(fit);
    out.sigma2_beta = cur_prior.isotropic ? cur_prior.isotropic->sigma2_beta : 0.0;
    out.sigma2_alpha = cur_prior.isotropic ? cur_prior.isotropic->sigma2_alpha : 0.0;
    return out;
}

}  // namespace hetvar
