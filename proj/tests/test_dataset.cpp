#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hetvar/dataset.hpp"
#include "hetvar/rng.hpp"
#include "quadratic_design.hpp"
#include "test_util.hpp"

using namespace hetvar;

TEST_CASE("validate_dataset builds designs with intercepts") {
    const csv::Table t = csv::read_string("out,a\n1,2\n2,4\n3,6\n");
    ColumnRoles roles;
    roles.response = "out";
    roles.mean_predictors = {"a"};
    roles.var_predictors = {"a"};
    roles.add_intercepts = true;
    const DesignData d = validate_dataset(t, roles);
    CHECK(d.n() == 3);
    CHECK(d.p() == 2);
    CHECK(d.q() == 2);
    CHECK(d.intercept_mean_col == 0);
    CHECK(d.intercept_var_col == 0);
    CHECK(d.X.col(0).isOnes());
    CHECK(d.mean_names[1] == "a");

    // deterministic and pure
    const DesignData d2 = validate_dataset(t, roles);
    CHECK(d.X == d2.X);
    CHECK(d.y == d2.y);
}

TEST_CASE("validate_dataset rejects bad tables") {
    ColumnRoles roles;
    roles.response = "y";

    SUBCASE("non-finite cell named") {
        const csv::Table t = csv::read_string("y,a\n1,2\n2,nan\n");
        CHECK_THROWS_WITH_AS(validate_dataset(t, roles),
                             doctest::Contains("column \"a\""), DataError);
    }
    SUBCASE("duplicate column names") {
        const csv::Table t = csv::read_string("y,a,a\n1,2,3\n");
        CHECK_THROWS_AS(validate_dataset(t, roles), DataError);
    }
    SUBCASE("zero rows") {
        const csv::Table t = csv::read_string("y,a\n");
        CHECK_THROWS_AS(validate_dataset(t, roles), DataError);
    }
    SUBCASE("missing response") {
        const csv::Table t = csv::read_string("z,a\n1,2\n");
        CHECK_THROWS_AS(validate_dataset(t, roles), DataError);
    }
}

TEST_CASE("quadratic expansion of ten inputs gives 64 predictors") {
    Rng rng(7);
    const int n = 30, k = 10;
    MatrixXd inputs(n, k);
    std::vector<std::string> names;
    for (int j = 0; j < k; ++j) names.push_back("v" + std::to_string(j));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) inputs(i, j) = rng.normal();
        inputs(i, 1) = i % 2 ? 1.0 : 2.0;  // one binary input, as in the diabetes data
    }
    const auto quad = hetvar_tests::quadratic_expand(inputs, names);
    CHECK(quad.columns.cols() == 64);

    // assembled dataset has p = q = 65 with the intercept
    csv::Table t;
    t.header.push_back("y");
    for (const auto& nm : quad.names) t.header.push_back(nm);
    for (int i = 0; i < n; ++i) {
        std::vector<double> row{static_cast<double>(i)};
        for (int j = 0; j < 64; ++j) row.push_back(quad.columns(i, j));
        t.rows.push_back(row);
    }
    ColumnRoles roles;
    roles.response = "y";
    const DesignData d = validate_dataset(t, roles);
    CHECK(d.p() == 65);
    CHECK(d.q() == 65);
}

TEST_CASE("standardize unit_ss forces sum of squares n") {
    DesignData d;
    const int n = 3;
    d.y = VectorXd::Zero(n);
    d.X.resize(n, 2);
    d.X.col(0).setOnes();
    d.X.col(1) << 1, 2, 3;
    d.Z = d.X;
    d.mean_names = {"(intercept)", "a"};
    d.var_names = d.mean_names;
    d.intercept_mean_col = 0;
    d.intercept_var_col = 0;

    auto [std_d, info] = standardize(d, StandardizePolicy::unit_ss);
    CHECK(std_d.X.col(1).squaredNorm() == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(std_d.X.col(0).isOnes());  // intercept untouched
    CHECK(info.unit_ss_applied);

    SUBCASE("zscore gives unit sample variance") {
        auto [zs, zinfo] = standardize(d, StandardizePolicy::zscore);
        const double var = zs.X.col(1).squaredNorm() / (n - 1);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("none is the identity") {
        auto [same, ninfo] = standardize(d, StandardizePolicy::none);
        CHECK(same.X == d.X);
    }
}

TEST_CASE("standardize rejects constant non-intercept columns by name") {
    DesignData d;
    d.y = VectorXd::Zero(4);
    d.X = MatrixXd::Ones(4, 2);
    d.Z = d.X;
    d.mean_names = {"(intercept)", "flat"};
    d.var_names = d.mean_names;
    d.intercept_mean_col = 0;
    d.intercept_var_col = 0;
    CHECK_THROWS_WITH_AS(standardize(d, StandardizePolicy::unit_ss),
                         doctest::Contains("flat"), DataError);
}

TEST_CASE("random 20x5 unit_ss columns hit sum-of-squares 20 and round trip") {
    const auto inst = hetvar_tests::random_instance(20, 6, 2, 99);
    auto [std_d, info] = standardize(inst.data, StandardizePolicy::unit_ss);
    for (int j = 1; j < 6; ++j)
        CHECK(std_d.X.col(j).squaredNorm() == doctest::Approx(20.0).epsilon(1e-12));

    // round trip: invert the affine transform column by column
    for (int j = 0; j < 6; ++j) {
        const VectorXd raw = std_d.X.col(j) / info.scale_x[j] +
                             VectorXd::Constant(20, info.shift_x[j]);
        CHECK((raw - inst.data.X.col(j)).lpNorm<Eigen::Infinity>() <
              1e-12 * (1.0 + inst.data.X.col(j).lpNorm<Eigen::Infinity>()));
    }

    // applying the training scaling to a second dataset matches by formula
    const auto other = hetvar_tests::random_instance(20, 6, 2, 100);
    const DesignData mapped = info.apply(other.data);
    for (int j = 1; j < 6; ++j) {
        const VectorXd expect =
            (other.data.X.col(j).array() - info.shift_x[j]) * info.scale_x[j];
        CHECK((mapped.X.col(j) - expect).lpNorm<Eigen::Infinity>() < 1e-14);
    }
}

TEST_CASE("unscale_coefficients maps a standardized fit back to raw scale") {
    hetvar::Rng rng(3);
    const int n = 50;
    DesignData d;
    d.y.resize(n);
    d.X.resize(n, 3);
    d.X.col(0).setOnes();
    for (int i = 0; i < n; ++i) {
        d.X(i, 1) = 3.0 + 2.0 * rng.normal();
        d.X(i, 2) = -1.0 + 0.5 * rng.normal();
        d.y[i] = 2.0 + 0.7 * d.X(i, 1) - 1.3 * d.X(i, 2);
    }
    d.Z = MatrixXd::Ones(n, 1);
    d.mean_names = {"(intercept)", "a", "b"};
    d.var_names = {"(intercept)"};
    d.intercept_mean_col = 0;
    d.intercept_var_col = 0;

    auto [std_d, info] = standardize(d, StandardizePolicy::unit_ss);
    const VectorXd coef_std =
        (std_d.X.transpose() * std_d.X).ldlt().solve(std_d.X.transpose() * std_d.y);
    const VectorXd coef_raw = unscale_coefficients(coef_std, info.shift_x, info.scale_x, 0);
    CHECK(coef_raw[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(coef_raw[1] == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(coef_raw[2] == doctest::Approx(-1.3).epsilon(1e-9));
}
