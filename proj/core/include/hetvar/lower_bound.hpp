#ifndef HETVAR_LOWER_BOUND_HPP
#define HETVAR_LOWER_BOUND_HPP

#include "hetvar/types.hpp"

namespace hetvar {

/// The three closed-form pieces of the variational lower bound:
/// expected log prior, expected log likelihood, and variational entropy.
struct ElboTerms {
    double t1 = 0.0;
    double t2 = 0.0;
    double t3 = 0.0;
    double total = 0.0;
};

/// Exponent z_i'mu - z_i'S z_i / 2 per observation, clipped at +-clip.
VectorXd variance_exponents(const MatrixXd& Z, const VectorXd& mu_alpha,
                            const MatrixXd& Sigma_alpha, double clip);

/// Quadratic forms x_i' S x_i for every row of X.
VectorXd row_quadratic(const MatrixXd& X, const MatrixXd& S);

/// Closed-form variational lower bound on log p(y).
double elbo(const DesignData& data, const PriorSpec& prior, const VariationalFit& fit,
            const SolverConfig& config = {});

ElboTerms elbo_terms(const DesignData& data, const PriorSpec& prior,
                     const VariationalFit& fit, const SolverConfig& config = {});

}  // namespace hetvar

#endif
