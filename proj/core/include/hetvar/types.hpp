#ifndef HETVAR_TYPES_HPP
#define HETVAR_TYPES_HPP

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetvar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised for invalid input data (bad cells, dimension mismatches, bad roles).
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Raised when a numerical routine cannot proceed (Cholesky failure after jitter,
/// contract violations such as shrink updates without an isotropic prior).
class SolverError : public Error {
public:
    explicit SolverError(const std::string& msg) : Error(msg) {}
};

/// Response vector plus mean- and variance-model design matrices.
/// Immutable after construction; share freely across threads.
struct DesignData {
    VectorXd y;        // n
    MatrixXd X;        // n x p, mean design
    MatrixXd Z;        // n x q, variance design
    std::vector<std::string> mean_names;  // length p
    std::vector<std::string> var_names;   // length q
    std::optional<int> intercept_mean_col;
    std::optional<int> intercept_var_col;

    int n() const { return static_cast<int>(y.size()); }
    int p() const { return static_cast<int>(X.cols()); }
    int q() const { return static_cast<int>(Z.cols()); }

    /// Throws DataError on any invariant violation (non-finite entries,
    /// dimension mismatches, flagged intercept column not constant one).
    void check() const;
};

enum class StandardizePolicy { none, unit_ss, zscore };

/// Per-column affine transforms applied by standardize(); enough to undo the
/// transform on data or on fitted coefficients.
struct ScalingInfo {
    VectorXd shift_x, scale_x;  // transformed = (raw - shift) * scale
    VectorXd shift_z, scale_z;
    bool unit_ss_applied = false;

    /// Applies this (training) scaling to another dataset, e.g. a validation set.
    DesignData apply(const DesignData& data) const;
};

/// Gaussian priors for the mean and variance coefficient blocks, with an
/// optional isotropic form carrying shrinkage hyperparameters.
struct IsotropicPrior {
    double sigma2_beta = 1000.0;
    double sigma2_alpha = 1000.0;
    bool shrink = false;
    double a = 0.01;  // inverse-gamma shape
    double b = 0.01;  // inverse-gamma scale
};

struct PriorSpec {
    VectorXd mu_beta0;
    MatrixXd Sigma_beta0;
    VectorXd mu_alpha0;
    MatrixXd Sigma_alpha0;
    std::optional<IsotropicPrior> isotropic;

    /// Zero-mean isotropic prior sigma2_b * I_p, sigma2_a * I_q.
    static PriorSpec isotropic_prior(int p, int q, double sigma2_b, double sigma2_a,
                                     bool shrink = false, double a = 0.01, double b = 0.01);
    /// Checks SPD covariances (Cholesky) and shrink/isotropic consistency.
    void check(int p, int q) const;
    /// Rebuilds the covariance blocks from updated isotropic scales.
    void set_isotropic_scales(double sigma2_b, double sigma2_a);
};

/// The four variational parameters plus the attained bound.
struct VariationalFit {
    VectorXd mu_beta_q;
    MatrixXd Sigma_beta_q;
    VectorXd mu_alpha_q;
    MatrixXd Sigma_alpha_q;
    double elbo = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Collects per-Newton-call diagnostics so callers can audit mode finding.
struct NewtonStats {
    long calls = 0;
    long calls_within_10_iters = 0;
    long max_iterations = 0;
    double max_final_grad = 0.0;

    void record(int iterations, double grad_inf_norm) {
        ++calls;
        if (iterations <= 10) ++calls_within_10_iters;
        if (iterations > max_iterations) max_iterations = iterations;
        if (grad_inf_norm > max_final_grad) max_final_grad = grad_inf_norm;
    }
};

enum class AlphaUpdate {
    one_shot,  // single gamma-GLM mode + Laplace covariance, as printed
    block      // iterate mode/covariance to the joint maximizer of the bound
};

struct SolverConfig {
    double elbo_tol = 1e-6;        // absolute stop for the outer loop
    int max_outer_iters = 200;
    double newton_tol = 1e-10;     // inf-norm gradient stop for mode finding
    int newton_max_iters = 100;
    double exponent_clip = 30.0;   // cap on |z'mu - z'Sz/2| before exp
    double jitter = 1e-10;         // one-time diagonal bump on Cholesky failure
    double init_ridge = 1e-6;      // scaled by n in the initialization solves
    double residual_floor = 1e-10; // floor on squared residuals before log
    AlphaUpdate alpha_update = AlphaUpdate::block;
    bool homoscedastic = false;    // scalar-alpha fast path
    NewtonStats* newton_stats = nullptr;  // optional sink, not owned
};

// numeric helpers shared across modules

/// Cholesky factor of an SPD matrix; retries once with `jitter` added to the
/// diagonal, then throws SolverError.
Eigen::LLT<MatrixXd> cholesky_spd(const MatrixXd& m, double jitter,
                                  const std::string& what);

/// log |M| for SPD M via Cholesky diagonal.
double log_det_spd(const MatrixXd& m, double jitter = 1e-10);

inline double clip(double x, double c) { return x > c ? c : (x < -c ? -c : x); }

}  // namespace hetvar

#endif
