#include "hetvar/types.hpp"

#include <cmath>
#include <sstream>

namespace hetvar {

void DesignData::check() const {
    const int nn = n();
    if (nn < 1) throw DataError("dataset has zero rows");
    if (p() < 1) throw DataError("mean design has zero columns");
    if (q() < 1) throw DataError("variance design has zero columns");
    if (X.rows() != nn || Z.rows() != nn)
        throw DataError("design row counts disagree with response length");
    if (static_cast<int>(mean_names.size()) != p() ||
        static_cast<int>(var_names.size()) != q())
        throw DataError("column name counts disagree with design shapes");
    if (!y.allFinite()) throw DataError("response contains a non-finite value");
    if (!X.allFinite()) throw DataError("mean design contains a non-finite value");
    if (!Z.allFinite()) throw DataError("variance design contains a non-finite value");
    auto check_intercept = [&](const MatrixXd& m, std::optional<int> col, const char* side) {
        if (!col) return;
        if (*col < 0 || *col >= m.cols())
            throw DataError(std::string("intercept column index out of range in ") + side);
        if ((m.col(*col).array() - 1.0).abs().maxCoeff() > 0.0)
            throw DataError(std::string("flagged intercept column is not constant 1 in ") + side);
    };
    check_intercept(X, intercept_mean_col, "mean design");
    check_intercept(Z, intercept_var_col, "variance design");
}

DesignData ScalingInfo::apply(const DesignData& data) const {
    DesignData out = data;
    if (shift_x.size() != data.X.cols() || shift_z.size() != data.Z.cols())
        throw DataError("scaling info does not match dataset shape");
    for (int j = 0; j < data.X.cols(); ++j)
        out.X.col(j) = (data.X.col(j).array() - shift_x[j]) * scale_x[j];
    for (int j = 0; j < data.Z.cols(); ++j)
        out.Z.col(j) = (data.Z.col(j).array() - shift_z[j]) * scale_z[j];
    return out;
}

PriorSpec PriorSpec::isotropic_prior(int p, int q, double sigma2_b, double sigma2_a,
                                     bool shrink, double a, double b) {
    PriorSpec spec;
    spec.mu_beta0 = VectorXd::Zero(p);
    spec.mu_alpha0 = VectorXd::Zero(q);
    spec.Sigma_beta0 = sigma2_b * MatrixXd::Identity(p, p);
    spec.Sigma_alpha0 = sigma2_a * MatrixXd::Identity(q, q);
    spec.isotropic = IsotropicPrior{sigma2_b, sigma2_a, shrink, a, b};
    return spec;
}

void PriorSpec::check(int p, int q) const {
    if (mu_beta0.size() != p || mu_alpha0.size() != q)
        throw DataError("prior mean dimensions disagree with the model");
    if (Sigma_beta0.rows() != p || Sigma_beta0.cols() != p ||
        Sigma_alpha0.rows() != q || Sigma_alpha0.cols() != q)
        throw DataError("prior covariance dimensions disagree with the model");
    cholesky_spd(Sigma_beta0, 0.0, "prior covariance of beta");
    cholesky_spd(Sigma_alpha0, 0.0, "prior covariance of alpha");
    if (isotropic && isotropic->shrink) {
        if (mu_beta0.cwiseAbs().maxCoeff() > 0.0 || mu_alpha0.cwiseAbs().maxCoeff() > 0.0)
            throw SolverError("shrinkage requires zero prior means");
        if (isotropic->sigma2_beta <= 0.0 || isotropic->sigma2_alpha <= 0.0 ||
            isotropic->a <= 0.0 || isotropic->b <= 0.0)
            throw SolverError("shrinkage hyperparameters must be positive");
    }
}

void PriorSpec::set_isotropic_scales(double sigma2_b, double sigma2_a) {
    if (!isotropic) throw SolverError("set_isotropic_scales requires an isotropic prior");
    isotropic->sigma2_beta = sigma2_b;
    isotropic->sigma2_alpha = sigma2_a;
    const int p = static_cast<int>(mu_beta0.size()), q = static_cast<int>(mu_alpha0.size());
    Sigma_beta0 = sigma2_b * MatrixXd::Identity(p, p);
    Sigma_alpha0 = sigma2_a * MatrixXd::Identity(q, q);
}

Eigen::LLT<MatrixXd> cholesky_spd(const MatrixXd& m, double jitter,
                                  const std::string& what) {
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt;
    if (jitter > 0.0) {
        MatrixXd bumped = m;
        bumped.diagonal().array() += jitter;
        llt.compute(bumped);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw SolverError("Cholesky factorization failed for " + what);
}

double log_det_spd(const MatrixXd& m, double jitter) {
    auto llt = cholesky_spd(m, jitter, "log-determinant argument");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace hetvar
