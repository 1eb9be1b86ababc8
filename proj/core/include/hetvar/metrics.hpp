#ifndef HETVAR_METRICS_HPP
#define HETVAR_METRICS_HPP

#include "hetvar/selection.hpp"
#include "hetvar/types.hpp"

namespace hetvar {

/// Mean squared prediction error (1/n) sum (y - yhat)^2.
double mse(const VectorXd& predictions, const VectorXd& truth);

/// Partial prediction score: average negative predictive log density under
/// the plug-in normal p(y|x) = N(x'mu_beta, exp(z'mu_alpha)). With
/// integrate_mean_uncertainty, x'Sigma_beta x is added to the variance.
double pps(const VariationalFit& fit, const DesignData& validation,
           bool integrate_mean_uncertainty = false);

struct FitClassification {
    bool correct_mean = false;
    bool correct_var = false;
    int nzc_mean = 0;  // candidates excluded from the mean model
    int nzc_var = 0;
};

/// Exact support recovery against the truth (intercepts excluded) and the
/// zero-coefficient counts.
FitClassification classify_fit(const ModelIndex& selected, const ModelIndex& truth,
                               const DesignData& data);

}  // namespace hetvar

#endif
