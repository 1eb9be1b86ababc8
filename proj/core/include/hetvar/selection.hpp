#ifndef HETVAR_SELECTION_HPP
#define HETVAR_SELECTION_HPP

#include <string>
#include <vector>

#include "hetvar/types.hpp"
#include "hetvar/vb_engine.hpp"

namespace hetvar {

/// Active predictor index sets over the full design. Intercepts are always
/// members and never candidates. Order is insertion order; it fixes the
/// coefficient layout of the active fit.
struct ModelIndex {
    std::vector<int> mean_active;  // indices into the full X
    std::vector<int> var_active;   // indices into the full Z

    bool mean_contains(int j) const;
    bool var_contains(int j) const;
};

enum class ModelPriorKind { uniform, bernoulli, ebic };

struct ModelPriorPolicy {
    ModelPriorKind kind = ModelPriorKind::ebic;
    double pi_mu = 0.5;
    double pi_sigma = 0.5;
};

/// Log prior of the model with |C| mean and |V| variance predictors active
/// out of p and q candidates; all counts exclude intercepts.
///   uniform:   0 (constant dropped)
///   bernoulli: |C| log pi_mu + (p-|C|) log(1-pi_mu) + same for the variance side
///   ebic:      -log C(p,|C|) - log C(q,|V|)
double model_log_prior(int n_mean_active, int n_var_active, int n_mean_candidates,
                       int n_var_candidates, const ModelPriorPolicy& policy);

enum class RankDirection { add_mean, add_var, drop_mean, drop_var };

/// One-step score for a candidate move: the optimized bound increment with
/// current-fit quantities frozen, plus the log model-prior change.
struct RankScore {
    int candidate = -1;
    RankDirection direction = RankDirection::add_mean;
    double bound_delta = 0.0;
    double log_prior_delta = 0.0;
    double total = 0.0;
    double candidate_mu = 0.0;
    double candidate_var = 0.0;
    bool newton_converged = true;
};

struct SelectionConfig {
    ModelPriorPolicy policy;
    bool restricted = false;     // variance candidates limited to the mean model
    bool backward = true;        // run the backward phase (fbVAR); false = fVAR
    bool homoscedastic = false;  // scalar variance model, correlation ranking
    double sigma2_beta0 = 1000.0;
    double sigma2_alpha0 = 1000.0;
    bool shrink = true;
    int max_steps = 1000;
    bool try_next_on_reject = false;  // strict reading keeps this off
    SolverConfig solver;
};

/// Frozen snapshot of the fitted current model used by the ranking routines.
/// Building one does a full refit of the active model.
struct SelectionState {
    const DesignData* data = nullptr;  // full designs, not owned
    ModelIndex index;
    VariationalFit fit;                // on the active columns
    double sigma2_beta = 0.0;          // current isotropic prior scales
    double sigma2_alpha = 0.0;
    double elbo = 0.0;
    double log_prior = 0.0;

    MatrixXd active_X() const;
    MatrixXd active_Z() const;
    /// exp(z_Vi' mu - z_Vi' S z_Vi / 2) per observation.
    VectorXd denominators(const SolverConfig& config) const;
    /// y - X_C mu_beta.
    VectorXd residuals() const;
};

SelectionState make_state(const DesignData& data, const ModelIndex& index,
                          const SelectionConfig& config);

RankScore rank_mean_add(const SelectionState& state, int j, const SelectionConfig& config);
RankScore rank_var_add(const SelectionState& state, int j, const SelectionConfig& config);
RankScore rank_mean_drop(const SelectionState& state, int j, const SelectionConfig& config);
RankScore rank_var_drop(const SelectionState& state, int j, const SelectionConfig& config);

struct PathEntry {
    int step = 0;
    RankDirection action = RankDirection::add_mean;
    int predictor = -1;
    std::string predictor_name;
    double one_step_total = 0.0;  // ranking score incl. prior delta
    double exact_total = 0.0;     // refit bound + log prior after the move
    double elbo = 0.0;
    double log_prior = 0.0;
    std::vector<std::pair<std::string, double>> mean_coef;  // snapshot after the move
    std::vector<std::pair<std::string, double>> var_coef;
};

struct SelectionResult {
    ModelIndex index;
    VariationalFit fit;  // refit on the selected model
    double sigma2_beta = 0.0;
    double sigma2_alpha = 0.0;
    double elbo = 0.0;
    double log_prior = 0.0;
    std::vector<PathEntry> path;
    std::string stopped_reason;
    int forward_iterations = 0;
};

/// Algorithm-2 style forward greedy search starting from intercepts only.
SelectionResult forward_var(const DesignData& data, const SelectionConfig& config);

/// Forward phase followed by backward elimination. In restricted mode,
/// dropping a mean predictor also drops it from the variance model.
SelectionResult forward_backward_var(const DesignData& data, const SelectionConfig& config);

/// Serializes a selection path: one row per accepted move with the one-step
/// and exact scores plus a coefficient snapshot.
void write_path_csv(const std::string& path, const SelectionResult& result);

}  // namespace hetvar

#endif
