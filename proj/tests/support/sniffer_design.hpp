#ifndef HETVAR_TESTS_SNIFFER_DESIGN_HPP
#define HETVAR_TESTS_SNIFFER_DESIGN_HPP

// Builds the sniffer analysis design: three tank-temperature group
// indicators, dispensed-gas temperature and two pressure interaction terms
// orthogonalized against the indicators in the mean model, and a variance
// model in centered gas temperature and gas pressure.

#include <string>

#include "hetvar/csv.hpp"
#include "hetvar/types.hpp"

namespace hetvar_tests {

inline hetvar::DesignData sniffer_design(const std::string& csv_path) {
    using namespace hetvar;
    const csv::Table t = csv::read_file(csv_path);
    const int n = t.nrow();
    const int c_tank = t.column_index("TankTemp");
    const int c_gas = t.column_index("GasTemp");
    const int c_gaspres = t.column_index("GasPres");
    const int c_y = t.column_index("Y");
    if (c_tank < 0 || c_gas < 0 || c_gaspres < 0 || c_y < 0)
        throw DataError("unexpected sniffer columns");

    VectorXd x1(n), x2(n), x4(n), y(n);
    for (int i = 0; i < n; ++i) {
        x1[i] = t.rows[i][c_tank];
        x2[i] = t.rows[i][c_gas];
        x4[i] = t.rows[i][c_gaspres];
        y[i] = t.rows[i][c_y];
    }

    // tank temperature groups: low (<= 40 F), middle, high (> 70 F)
    MatrixXd g = MatrixXd::Zero(n, 3);
    for (int i = 0; i < n; ++i) {
        if (x1[i] <= 40.0)
            g(i, 0) = 1.0;
        else if (x1[i] <= 70.0)
            g(i, 1) = 1.0;
        else
            g(i, 2) = 1.0;
    }

    auto orth = [&](const VectorXd& col) {
        const VectorXd coef =
            (g.transpose() * g).ldlt().solve(g.transpose() * col);
        return (col - g * coef).eval();
    };
    VectorXd g12x4(n), g3x4(n);
    for (int i = 0; i < n; ++i) {
        g12x4[i] = (g(i, 0) + g(i, 1)) * x4[i];
        g3x4[i] = g(i, 2) * x4[i];
    }

    DesignData d;
    d.y = y;
    d.X.resize(n, 6);
    d.X.col(0) = g.col(0);
    d.X.col(1) = g.col(1);
    d.X.col(2) = g.col(2);
    d.X.col(3) = orth(x2);
    d.X.col(4) = orth(g12x4);
    d.X.col(5) = orth(g3x4);
    d.mean_names = {"g1", "g2", "g3", "gas_temp", "g12_gas_pres", "g3_gas_pres"};

    d.Z.resize(n, 3);
    d.Z.col(0).setOnes();
    d.Z.col(1) = x2.array() - x2.mean();
    d.Z.col(2) = x4.array() - x4.mean();
    d.var_names = {"(intercept)", "gas_temp_c", "gas_pres_c"};
    d.intercept_var_col = 0;
    return d;
}

}  // namespace hetvar_tests

#endif
