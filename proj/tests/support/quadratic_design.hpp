#ifndef HETVAR_TESTS_QUADRATIC_DESIGN_HPP
#define HETVAR_TESTS_QUADRATIC_DESIGN_HPP

// Quadratic expansion of a set of input variables: main effects, pairwise
// interactions, and squares of the non-binary inputs.

#include <string>
#include <vector>

#include "hetvar/types.hpp"

namespace hetvar_tests {

struct QuadraticDesign {
    hetvar::MatrixXd columns;  // n x m expanded predictors
    std::vector<std::string> names;
};

inline QuadraticDesign quadratic_expand(const hetvar::MatrixXd& inputs,
                                        const std::vector<std::string>& input_names) {
    using namespace hetvar;
    const int n = static_cast<int>(inputs.rows());
    const int k = static_cast<int>(inputs.cols());
    QuadraticDesign out;
    std::vector<VectorXd> cols;
    for (int j = 0; j < k; ++j) {
        cols.push_back(inputs.col(j));
        out.names.push_back(input_names[j]);
    }
    for (int j = 0; j < k; ++j)
        for (int l = j + 1; l < k; ++l) {
            cols.push_back(inputs.col(j).cwiseProduct(inputs.col(l)));
            out.names.push_back(input_names[j] + ":" + input_names[l]);
        }
    for (int j = 0; j < k; ++j) {
        // a binary input's square carries no new information
        bool binary = true;
        double lo = inputs(0, j), hi = inputs(0, j);
        for (int i = 1; i < n; ++i) {
            lo = std::min(lo, inputs(i, j));
            hi = std::max(hi, inputs(i, j));
        }
        for (int i = 0; i < n && binary; ++i)
            binary = inputs(i, j) == lo || inputs(i, j) == hi;
        if (binary) continue;
        cols.push_back(inputs.col(j).cwiseAbs2());
        out.names.push_back(input_names[j] + "^2");
    }
    out.columns.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j)
        out.columns.col(static_cast<Eigen::Index>(j)) = cols[j];
    return out;
}

}  // namespace hetvar_tests

#endif
