#include "hetvar/lower_bound.hpp"

#include <cmath>

namespace hetvar {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_dims(const DesignData& data, const PriorSpec& prior, const VariationalFit& fit) {
    const int p = data.p(), q = data.q();
    prior.check(p, q);
    if (fit.mu_beta_q.size() != p || fit.mu_alpha_q.size() != q ||
        fit.Sigma_beta_q.rows() != p || fit.Sigma_alpha_q.rows() != q)
        throw DataError("variational fit dimensions disagree with the model");
}
}  // namespace

VectorXd variance_exponents(const MatrixXd& Z, const VectorXd& mu_alpha,
                            const MatrixXd& Sigma_alpha, double clip_at) {
    VectorXd e = Z * mu_alpha - 0.5 * row_quadratic(Z, Sigma_alpha);
    for (int i = 0; i < e.size(); ++i) e[i] = clip(e[i], clip_at);
    return e;
}

VectorXd row_quadratic(const MatrixXd& X, const MatrixXd& S) {
    return ((X * S).cwiseProduct(X)).rowwise().sum();
}

ElboTerms elbo_terms(const DesignData& data, const PriorSpec& prior,
                     const VariationalFit& fit, const SolverConfig& config) {
    check_dims(data, prior, fit);
    const int n = data.n(), p = data.p(), q = data.q();

    const auto llt_b0 = cholesky_spd(prior.Sigma_beta0, config.jitter, "Sigma_beta0");
    const auto llt_a0 = cholesky_spd(prior.Sigma_alpha0, config.jitter, "Sigma_alpha0");
    const double logdet_b0 = 2.0 * llt_b0.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double logdet_a0 = 2.0 * llt_a0.matrixL().toDenseMatrix().diagonal().array().log().sum();

    const VectorXd db = fit.mu_beta_q - prior.mu_beta0;
    const VectorXd da = fit.mu_alpha_q - prior.mu_alpha0;
    const double quad_b = db.dot(llt_b0.solve(db));
    const double quad_a = da.dot(llt_a0.solve(da));
    const double tr_b = llt_b0.solve(fit.Sigma_beta_q).trace();
    const double tr_a = llt_a0.solve(fit.Sigma_alpha_q).trace();

    ElboTerms t;
    t.t1 = -0.5 * (p + q) * kLog2Pi - 0.5 * logdet_b0 - 0.5 * logdet_a0 - 0.5 * tr_b -
           0.5 * tr_a - 0.5 * quad_b - 0.5 * quad_a;

    t.t2 = -0.5 * n * kLog2Pi;
    if (n > 0) {
        const VectorXd expo = variance_exponents(data.Z, fit.mu_alpha_q, fit.Sigma_alpha_q,
                                                 config.exponent_clip);
        const VectorXd resid = data.y - data.X * fit.mu_beta_q;
        const VectorXd quad = resid.array().square().matrix() +
                              row_quadratic(data.X, fit.Sigma_beta_q);
        t.t2 += -0.5 * (data.Z * fit.mu_alpha_q).sum() -
                0.5 * (quad.array() * (-expo.array()).exp()).sum();
    }

    t.t3 = 0.5 * (p + q) * kLog2Pi + 0.5 * (p + q) +
           0.5 * log_det_spd(fit.Sigma_beta_q, config.jitter) +
           0.5 * log_det_spd(fit.Sigma_alpha_q, config.jitter);

    t.total = t.t1 + t.t2 + t.t3;
    if (!std::isfinite(t.total)) throw SolverError("lower bound is not finite");
    return t;
}

double elbo(const DesignData& data, const PriorSpec& prior, const VariationalFit& fit,
            const SolverConfig& config) {
    return elbo_terms(data, prior, fit, config).total;
}

}  // namespace hetvar
