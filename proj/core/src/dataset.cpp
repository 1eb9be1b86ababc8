#include "hetvar/dataset.hpp"

#include <cmath>
#include <set>

namespace hetvar {

namespace {

int require_column(const csv::Table& t, const std::string& name, const char* role) {
    int j = t.column_index(name);
    if (j < 0)
        throw DataError(std::string(role) + " column \"" + name + "\" not found in table");
    return j;
}

void check_finite_column(const csv::Table& t, int j) {
    for (int i = 0; i < t.nrow(); ++i)
        if (!std::isfinite(t.rows[i][j]))
            throw DataError("non-finite value at row " + std::to_string(i + 1) +
                            ", column \"" + t.header[j] + "\"");
}

}  // namespace

DesignData validate_dataset(const csv::Table& table, const ColumnRoles& roles) {
    if (table.nrow() == 0) throw DataError("table has zero data rows");
    {
        std::set<std::string> seen;
        for (const auto& h : table.header)
            if (!seen.insert(h).second)
                throw DataError("duplicate column name \"" + h + "\"");
    }
    const int yi = require_column(table, roles.response, "response");
    check_finite_column(table, yi);

    std::vector<std::string> mean_cols = roles.mean_predictors;
    if (mean_cols.empty()) {
        for (const auto& h : table.header)
            if (h != roles.response) mean_cols.push_back(h);
    }
    if (mean_cols.empty()) throw DataError("no mean predictors assigned");
    std::vector<std::string> var_cols =
        roles.var_predictors.empty() ? mean_cols : roles.var_predictors;

    const int n = table.nrow();
    DesignData d;
    d.y.resize(n);
    for (int i = 0; i < n; ++i) d.y[i] = table.rows[i][yi];

    auto build = [&](const std::vector<std::string>& cols, const char* role,
                     MatrixXd& m, std::vector<std::string>& names,
                     std::optional<int>& intercept) {
        const int extra = roles.add_intercepts ? 1 : 0;
        m.resize(n, extra + static_cast<int>(cols.size()));
        names.clear();
        if (roles.add_intercepts) {
            m.col(0).setOnes();
            names.push_back("(intercept)");
            intercept = 0;
        }
        for (size_t k = 0; k < cols.size(); ++k) {
            int j = require_column(table, cols[k], role);
            check_finite_column(table, j);
            for (int i = 0; i < n; ++i) m(i, extra + static_cast<int>(k)) = table.rows[i][j];
            names.push_back(cols[k]);
        }
    };
    build(mean_cols, "mean predictor", d.X, d.mean_names, d.intercept_mean_col);
    build(var_cols, "variance predictor", d.Z, d.var_names, d.intercept_var_col);
    d.check();
    return d;
}

namespace {

void standardize_block(MatrixXd& m, const std::vector<std::string>& names,
                       std::optional<int> intercept, StandardizePolicy policy,
                       VectorXd& shift, VectorXd& scale) {
    const int n = static_cast<int>(m.rows());
    shift = VectorXd::Zero(m.cols());
    scale = VectorXd::Ones(m.cols());
    if (policy == StandardizePolicy::none) return;
    for (int j = 0; j < m.cols(); ++j) {
        if (intercept && *intercept == j) continue;
        const double mean = m.col(j).mean();
        VectorXd centered = m.col(j).array() - mean;
        const double ss = centered.squaredNorm();
        if (ss <= 0.0)
            throw DataError("constant column \"" + names[j] + "\" cannot be standardized");
        const double s = policy == StandardizePolicy::unit_ss
                             ? std::sqrt(static_cast<double>(n) / ss)
                             : std::sqrt(static_cast<double>(n - 1) / ss);
        m.col(j) = centered * s;
        shift[j] = mean;
        scale[j] = s;
    }
}

}  // namespace

std::pair<DesignData, ScalingInfo> standardize(const DesignData& data,
                                               StandardizePolicy policy) {
    data.check();
    DesignData out = data;
    ScalingInfo info;
    standardize_block(out.X, out.mean_names, out.intercept_mean_col, policy,
                      info.shift_x, info.scale_x);
    standardize_block(out.Z, out.var_names, out.intercept_var_col, policy,
                      info.shift_z, info.scale_z);
    info.unit_ss_applied = policy == StandardizePolicy::unit_ss;
    return {std::move(out), std::move(info)};
}

VectorXd unscale_coefficients(const VectorXd& coef, const VectorXd& shift,
                              const VectorXd& scale, std::optional<int> intercept_col) {
    if (coef.size() != shift.size() || coef.size() != scale.size())
        throw DataError("coefficient vector does not match scaling info");
    VectorXd out = coef;
    double intercept_adjust = 0.0;
    for (int j = 0; j < coef.size(); ++j) {
        if (intercept_col && *intercept_col == j) continue;
        out[j] = coef[j] * scale[j];
        intercept_adjust += out[j] * shift[j];
    }
    if (intercept_col) out[*intercept_col] -= intercept_adjust;
    return out;
}

}  // namespace hetvar
