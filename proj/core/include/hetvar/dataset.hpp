#ifndef HETVAR_DATASET_HPP
#define HETVAR_DATASET_HPP

#include <string>
#include <utility>
#include <vector>

#include "hetvar/csv.hpp"
#include "hetvar/types.hpp"

namespace hetvar {

/// Column-role assignment for building a DesignData from a raw table.
struct ColumnRoles {
    std::string response;
    std::vector<std::string> mean_predictors;  // empty = all non-response columns
    std::vector<std::string> var_predictors;   // empty = same as mean predictors
    bool add_intercepts = true;
};

/// Validates the table against the roles and assembles a DesignData.
/// Intercept columns, when requested, are prepended and flagged.
DesignData validate_dataset(const csv::Table& table, const ColumnRoles& roles);

/// Standardizes non-intercept columns of X and Z in place of a copy.
///   none:    identity transform.
///   unit_ss: center to mean zero, then scale so each column satisfies
///            sum_i x_ij^2 = n.
///   zscore:  center and scale to unit sample variance.
/// Intercept columns are never touched. Constant non-intercept columns are
/// rejected by name.
std::pair<DesignData, ScalingInfo> standardize(const DesignData& data,
                                               StandardizePolicy policy);

/// Maps coefficients fitted on a standardized design back to the raw scale.
/// The intercept absorbs the shifts; non-intercept slopes multiply by their
/// column scales.
VectorXd unscale_coefficients(const VectorXd& coef, const VectorXd& shift,
                              const VectorXd& scale, std::optional<int> intercept_col);

}  // namespace hetvar

#endif
