#ifndef HETVAR_HOMOSCEDASTIC_HPP
#define HETVAR_HOMOSCEDASTIC_HPP

#include "hetvar/types.hpp"
#include "hetvar/vb_engine.hpp"

namespace hetvar::homo {

/// Scalar variance factor for the constant-variance model.
struct ScalarAlphaFactor {
    double mu_alpha_q = 0.0;
    double var_alpha_q = 1.0;
    double prior_var = 1.0;
};

/// Closed-form scalar alpha update from the pseudo-residual sum
/// v = sum_i ((y_i - x_i'mu)^2 + x_i'S x_i):
///   mu    = (v - n) / (v + 2 / prior_var)
///   var   = ((v/2) exp(-mu) + 1 / prior_var)^-1
/// With refine, the mean is polished by Newton against the scalar log density
///   -(n/2) a - (v/2) exp(-a) - a^2 / (2 prior_var)
/// and the variance recomputed at the polished mode.
ScalarAlphaFactor update_alpha_scalar(double v, double prior_var, int n,
                                      bool refine = true, double newton_tol = 1e-10);

/// Scalar analogue of the block alpha update: the polished pair additionally
/// satisfies the bound's own stationarity in (mu, var), matching what the
/// general engine converges to on an intercept-only variance model.
ScalarAlphaFactor update_alpha_scalar_block(double v, double prior_var, int n,
                                            double newton_tol = 1e-10);

/// One-step mean-add score for the homoscedastic model, identical in value to
/// the general mean-add score with an intercept-only variance model, plus the
/// residual correlation statistic |sum_i x_ij (y_i - x_Ci'mu)| that drives the
/// ranking on a unit-sum-of-squares design.
struct HomoRankScore {
    double bound_delta = 0.0;
    double candidate_mu = 0.0;
    double candidate_var = 0.0;
    double correlation_stat = 0.0;
};

HomoRankScore rank_mean_add_homo(const VectorXd& xj, const VectorXd& residuals,
                                 double denom, double sigma2_beta, int n);

/// Constant-variance fit: Algorithm-1 sweeps with the alpha steps replaced by
/// the scalar closed forms (block-polished under AlphaUpdate::block).
/// Requires Z to be a single constant-one column.
FitResult fit_vb_homo(const DesignData& data, const PriorSpec& prior,
                      const SolverConfig& config);

}  // namespace hetvar::homo

#endif
