#include "hetvar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hetvar/lower_bound.hpp"

namespace hetvar {

double mse(const VectorXd& predictions, const VectorXd& truth) {
    if (predictions.size() != truth.size() || predictions.size() == 0)
        throw DataError("mse needs equal-length non-empty vectors");
    return (predictions - truth).squaredNorm() / static_cast<double>(truth.size());
}

double pps(const VariationalFit& fit, const DesignData& validation,
           bool integrate_mean_uncertainty) {
    if (validation.p() != fit.mu_beta_q.size() || validation.q() != fit.mu_alpha_q.size())
        throw DataError("validation design does not match the fitted model");
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    const VectorXd mean = validation.X * fit.mu_beta_q;
    const VectorXd log_var = validation.Z * fit.mu_alpha_q;
    double total = 0.0;
    for (int i = 0; i < validation.n(); ++i) {
        double variance = std::exp(log_var[i]);
        if (integrate_mean_uncertainty)
            variance += validation.X.row(i) * fit.Sigma_beta_q *
                        validation.X.row(i).transpose();
        const double r = validation.y[i] - mean[i];
        total += 0.5 * kLog2Pi + 0.5 * std::log(variance) + 0.5 * r * r / variance;
    }
    return total / validation.n();
}

FitClassification classify_fit(const ModelIndex& selected, const ModelIndex& truth,
                               const DesignData& data) {
    auto strip = [](const std::vector<int>& v, std::optional<int> intercept) {
        std::set<int> s(v.begin(), v.end());
        if (intercept) s.erase(*intercept);
        return s;
    };
    const auto sel_mean = strip(selected.mean_active, data.intercept_mean_col);
    const auto sel_var = strip(selected.var_active, data.intercept_var_col);
    const auto tru_mean = strip(truth.mean_active, data.intercept_mean_col);
    const auto tru_var = strip(truth.var_active, data.intercept_var_col);

    FitClassification c;
    c.correct_mean = sel_mean == tru_mean;
    c.correct_var = sel_var == tru_var;
    const int p_cand = data.p() - (data.intercept_mean_col ? 1 : 0);
    const int q_cand = data.q() - (data.intercept_var_col ? 1 : 0);
    c.nzc_mean = p_cand - static_cast<int>(sel_mean.size());
    c.nzc_var = q_cand - static_cast<int>(sel_var.size());
    return c;
}

}  // namespace hetvar
