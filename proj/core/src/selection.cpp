#include "hetvar/selection.hpp"

#include <algorithm>
#include <cmath>

#include "hetvar/csv.hpp"
#include "hetvar/homoscedastic.hpp"
#include "hetvar/lower_bound.hpp"

namespace hetvar {

namespace {

bool contains(const std::vector<int>& v, int j) {
    return std::find(v.begin(), v.end(), j) != v.end();
}

MatrixXd select_columns(const MatrixXd& m, const std::vector<int>& cols) {
    MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
    return out;
}

double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

int candidate_count(const DesignData& d, bool mean_side) {
    const int total = mean_side ? d.p() : d.q();
    const auto& icol = mean_side ? d.intercept_mean_col : d.intercept_var_col;
    return total - (icol ? 1 : 0);
}

int active_candidate_count(const DesignData& d, const std::vector<int>& active, bool mean_side) {
    const auto& icol = mean_side ? d.intercept_mean_col : d.intercept_var_col;
    int c = static_cast<int>(active.size());
    if (icol && contains(active, *icol)) --c;
    return c;
}

}  // namespace

bool ModelIndex::mean_contains(int j) const { return contains(mean_active, j); }
bool ModelIndex::var_contains(int j) const { return contains(var_active, j); }

double model_log_prior(int n_mean_active, int n_var_active, int n_mean_candidates,
                       int n_var_candidates, const ModelPriorPolicy& policy) {
    switch (policy.kind) {
        case ModelPriorKind::uniform:
            return 0.0;
        case ModelPriorKind::bernoulli: {
            if (policy.pi_mu <= 0.0 || policy.pi_mu >= 1.0 || policy.pi_sigma <= 0.0 ||
                policy.pi_sigma >= 1.0)
                throw DataError("bernoulli model prior needs inclusion probabilities in (0,1)");
            return n_mean_active * std::log(policy.pi_mu) +
                   (n_mean_candidates - n_mean_active) * std::log1p(-policy.pi_mu) +
                   n_var_active * std::log(policy.pi_sigma) +
                   (n_var_candidates - n_var_active) * std::log1p(-policy.pi_sigma);
        }
        case ModelPriorKind::ebic:
            return -log_binomial(n_mean_candidates, n_mean_active) -
                   log_binomial(n_var_candidates, n_var_active);
    }
    throw DataError("unknown model prior kind");
}

MatrixXd SelectionState::active_X() const { return select_columns(data->X, index.mean_active); }
MatrixXd SelectionState::active_Z() const { return select_columns(data->Z, index.var_active); }

VectorXd SelectionState::denominators(const SolverConfig& config) const {
    const VectorXd expo =
        variance_exponents(active_Z(), fit.mu_alpha_q, fit.Sigma_alpha_q, config.exponent_clip);
    return expo.array().exp();
}

VectorXd SelectionState::residuals() const { return data->y - active_X() * fit.mu_beta_q; }

namespace {

DesignData active_data(const DesignData& data, const ModelIndex& index) {
    DesignData d;
    d.y = data.y;
    d.X = select_columns(data.X, index.mean_active);
    d.Z = select_columns(data.Z, index.var_active);
    for (int j : index.mean_active) d.mean_names.push_back(data.mean_names[j]);
    for (int j : index.var_active) d.var_names.push_back(data.var_names[j]);
    for (size_t k = 0; k < index.mean_active.size(); ++k)
        if (data.intercept_mean_col && index.mean_active[k] == *data.intercept_mean_col)
            d.intercept_mean_col = static_cast<int>(k);
    for (size_t k = 0; k < index.var_active.size(); ++k)
        if (data.intercept_var_col && index.var_active[k] == *data.intercept_var_col)
            d.intercept_var_col = static_cast<int>(k);
    return d;
}

}  // namespace

SelectionState make_state(const DesignData& data, const ModelIndex& index,
                          const SelectionConfig& config) {
    SelectionState st;
    st.data = &data;
    st.index = index;
    const DesignData act = active_data(data, index);
    PriorSpec prior = PriorSpec::isotropic_prior(act.p(), act.q(), config.sigma2_beta0,
                                                 config.sigma2_alpha0, config.shrink);
    SolverConfig solver = config.solver;
    solver.homoscedastic = config.homoscedastic;
    const FitResult res = fit_vb(act, prior, solver);
    st.fit = res.fit;
    st.sigma2_beta = config.shrink ? res.sigma2_beta : config.sigma2_beta0;
    st.sigma2_alpha = config.shrink ? res.sigma2_alpha : config.sigma2_alpha0;
    st.elbo = res.fit.elbo;
    st.log_prior = model_log_prior(
        active_candidate_count(data, index.mean_active, true),
        active_candidate_count(data, index.var_active, false),
        candidate_count(data, true), candidate_count(data, false), config.policy);
    return st;
}

namespace {

// Mean-add optimizers and increment for an arbitrary residual/denominator pair.
RankScore mean_add_score(const VectorXd& xj, const VectorXd& resid, const VectorXd& denom,
                         double sigma2_beta) {
    RankScore s;
    double num = 0.0, prec = 1.0 / sigma2_beta;
    for (int i = 0; i < xj.size(); ++i) {
        num += xj[i] * resid[i] / denom[i];
        prec += xj[i] * xj[i] / denom[i];
    }
    s.candidate_var = 1.0 / prec;
    s.candidate_mu = num * s.candidate_var;
    s.bound_delta = 0.5 * std::log(s.candidate_var / sigma2_beta) +
                    0.5 * s.candidate_mu * s.candidate_mu / s.candidate_var;
    return s;
}

// Variance-add optimizers: Taylor start, Newton refinement on the candidate's
// profile log density, curvature variance, and the full increment at the pair.
RankScore var_add_score(const VectorXd& zj, const VectorXd& v, double sigma2_alpha,
                        const SolverConfig& config) {
    RankScore s;
    double num = 0.0, den = 1.0 / sigma2_alpha;
    for (int i = 0; i < zj.size(); ++i) {
        num += 0.5 * zj[i] * (v[i] - 1.0);
        den += 0.5 * zj[i] * zj[i] * v[i];
    }
    double mu = num / den;

    auto profile = [&](double a) {
        double f = -0.5 * a * a / sigma2_alpha;
        for (int i = 0; i < zj.size(); ++i)
            f += -0.5 * zj[i] * a - 0.5 * v[i] * std::exp(clip(-zj[i] * a, config.exponent_clip));
        return f;
    };
    double f = profile(mu);
    int iters = 0;
    double grad = 0.0;
    for (; iters < config.newton_max_iters; ++iters) {
        double g = -mu / sigma2_alpha, h = -1.0 / sigma2_alpha;
        for (int i = 0; i < zj.size(); ++i) {
            const double e = v[i] * std::exp(clip(-zj[i] * mu, config.exponent_clip));
            g += -0.5 * zj[i] + 0.5 * zj[i] * e;
            h += -0.5 * zj[i] * zj[i] * e;
        }
        grad = std::abs(g);
        if (grad <= config.newton_tol) break;
        const double step = -g / h;
        // line search only while the predicted gain is measurable in doubles
        if (0.5 * g * step < 1e-12 * (1.0 + std::abs(f))) {
            mu += step;
            f = profile(mu);
        } else {
            double t = 1.0;
            while (profile(mu + t * step) < f && t > 1e-8) t *= 0.5;
            mu += t * step;
            f = profile(mu);
        }
    }
    s.newton_converged = grad <= config.newton_tol;
    if (config.newton_stats) config.newton_stats->record(iters, grad);

    double curv = 1.0 / sigma2_alpha;
    for (int i = 0; i < zj.size(); ++i)
        curv += 0.5 * zj[i] * zj[i] * v[i] * std::exp(clip(-zj[i] * mu, config.exponent_clip));
    s.candidate_mu = mu;
    s.candidate_var = 1.0 / curv;

    double sum_z = 0.0, sum_grow = 0.0;
    for (int i = 0; i < zj.size(); ++i) {
        sum_z += zj[i];
        const double grow =
            std::exp(clip(-zj[i] * mu + 0.5 * zj[i] * zj[i] * s.candidate_var,
                          config.exponent_clip));
        sum_grow += v[i] * (grow - 1.0);
    }
    s.bound_delta = 0.5 + 0.5 * std::log(s.candidate_var / sigma2_alpha) -
                    s.candidate_var / (2.0 * sigma2_alpha) -
                    mu * mu / (2.0 * sigma2_alpha) - 0.5 * mu * sum_z - 0.5 * sum_grow;
    return s;
}

// Denominators over a variance index set with the current fit's coordinates
// for that set (used by the drop scores, which delete one coordinate).
VectorXd denominators_for(const SelectionState& st, const std::vector<int>& var_set,
                          const SolverConfig& config) {
    std::vector<int> pos;
    for (int j : var_set) {
        auto it = std::find(st.index.var_active.begin(), st.index.var_active.end(), j);
        pos.push_back(static_cast<int>(it - st.index.var_active.begin()));
    }
    VectorXd mu(pos.size());
    MatrixXd sigma(pos.size(), pos.size());
    for (size_t a = 0; a < pos.size(); ++a) {
        mu[a] = st.fit.mu_alpha_q[pos[a]];
        for (size_t b = 0; b < pos.size(); ++b)
            sigma(a, b) = st.fit.Sigma_alpha_q(pos[a], pos[b]);
    }
    const MatrixXd z = select_columns(st.data->Z, var_set);
    return variance_exponents(z, mu, sigma, config.exponent_clip).array().exp();
}

}  // namespace

RankScore rank_mean_add(const SelectionState& state, int j, const SelectionConfig& config) {
    RankScore s = mean_add_score(state.data->X.col(j), state.residuals(),
                                 state.denominators(config.solver), state.sigma2_beta);
    s.candidate = j;
    s.direction = RankDirection::add_mean;
    const int pc = candidate_count(*state.data, true), qc = candidate_count(*state.data, false);
    const int ca = active_candidate_count(*state.data, state.index.mean_active, true);
    const int va = active_candidate_count(*state.data, state.index.var_active, false);
    s.log_prior_delta =
        model_log_prior(ca + 1, va, pc, qc, config.policy) - state.log_prior;
    s.total = s.bound_delta + s.log_prior_delta;
    return s;
}

RankScore rank_var_add(const SelectionState& state, int j, const SelectionConfig& config) {
    const VectorXd denom = state.denominators(config.solver);
    const VectorXd resid = state.residuals();
    const VectorXd quad = row_quadratic(state.active_X(), state.fit.Sigma_beta_q);
    VectorXd v(denom.size());
    for (int i = 0; i < v.size(); ++i)
        v[i] = (resid[i] * resid[i] + quad[i]) / denom[i];
    RankScore s = var_add_score(state.data->Z.col(j), v, state.sigma2_alpha, config.solver);
    s.candidate = j;
    s.direction = RankDirection::add_var;
    const int pc = candidate_count(*state.data, true), qc = candidate_count(*state.data, false);
    const int ca = active_candidate_count(*state.data, state.index.mean_active, true);
    const int va = active_candidate_count(*state.data, state.index.var_active, false);
    s.log_prior_delta =
        model_log_prior(ca, va + 1, pc, qc, config.policy) - state.log_prior;
    s.total = s.bound_delta + s.log_prior_delta;
    return s;
}

RankScore rank_mean_drop(const SelectionState& state, int j, const SelectionConfig& config) {
    if (!state.index.mean_contains(j)) throw DataError("drop candidate not in the mean model");
    // residuals with j's column removed from the active fit
    std::vector<int> kept;
    VectorXd resid = state.data->y;
    for (size_t k = 0; k < state.index.mean_active.size(); ++k) {
        const int col = state.index.mean_active[k];
        if (col == j) continue;
        resid -= state.data->X.col(col) * state.fit.mu_beta_q[static_cast<int>(k)];
        kept.push_back(col);
    }
    // In restricted mode the coupled removal also deletes j from the variance
    // side before computing the denominators.
    std::vector<int> var_set = state.index.var_active;
    if (config.restricted && state.index.var_contains(j))
        var_set.erase(std::remove(var_set.begin(), var_set.end(), j), var_set.end());
    const VectorXd denom = denominators_for(state, var_set, config.solver);

    RankScore s = mean_add_score(state.data->X.col(j), resid, denom, state.sigma2_beta);
    const double gamma = s.bound_delta;
    s.bound_delta = -gamma;
    s.candidate = j;
    s.direction = RankDirection::drop_mean;
    const int pc = candidate_count(*state.data, true), qc = candidate_count(*state.data, false);
    const int ca = active_candidate_count(*state.data, state.index.mean_active, true);
    const int va_new = active_candidate_count(*state.data, var_set, false);
    s.log_prior_delta =
        model_log_prior(ca - 1, va_new, pc, qc, config.policy) - state.log_prior;
    s.total = s.bound_delta + s.log_prior_delta;
    return s;
}

RankScore rank_var_drop(const SelectionState& state, int j, const SelectionConfig& config) {
    if (!state.index.var_contains(j)) throw DataError("drop candidate not in the variance model");
    std::vector<int> var_kept;
    for (int col : state.index.var_active)
        if (col != j) var_kept.push_back(col);
    const VectorXd denom = denominators_for(state, var_kept, config.solver);
    const VectorXd resid = state.residuals();
    const VectorXd quad = row_quadratic(state.active_X(), state.fit.Sigma_beta_q);
    VectorXd v(denom.size());
    for (int i = 0; i < v.size(); ++i)
        v[i] = (resid[i] * resid[i] + quad[i]) / denom[i];

    RankScore s = var_add_score(state.data->Z.col(j), v, state.sigma2_alpha, config.solver);
    const double gamma = s.bound_delta;
    s.bound_delta = -gamma;
    s.candidate = j;
    s.direction = RankDirection::drop_var;
    const int pc = candidate_count(*state.data, true), qc = candidate_count(*state.data, false);
    const int ca = active_candidate_count(*state.data, state.index.mean_active, true);
    const int va = active_candidate_count(*state.data, state.index.var_active, false);
    s.log_prior_delta =
        model_log_prior(ca, va - 1, pc, qc, config.policy) - state.log_prior;
    s.total = s.bound_delta + s.log_prior_delta;
    return s;
}

namespace {

ModelIndex intercept_only_index(const DesignData& data) {
    ModelIndex idx;
    if (!data.intercept_mean_col || !data.intercept_var_col)
        throw DataError("selection requires flagged intercept columns in both designs");
    idx.mean_active.push_back(*data.intercept_mean_col);
    idx.var_active.push_back(*data.intercept_var_col);
    return idx;
}

// Picks the best-scoring candidate: highest total, ties to the smallest index.
template <typename ScoreFn>
std::optional<RankScore> best_candidate(const std::vector<int>& pool, ScoreFn&& score) {
    std::optional<RankScore> best;
    for (int j : pool) {
        RankScore s = score(j);
        if (!best || s.total > best->total + 1e-12) best = s;
    }
    return best;
}

std::vector<std::pair<std::string, double>> coef_snapshot(const DesignData& data,
                                                          const std::vector<int>& active,
                                                          const VectorXd& mu, bool mean_side) {
    std::vector<std::pair<std::string, double>> out;
    const auto& names = mean_side ? data.mean_names : data.var_names;
    for (size_t k = 0; k < active.size(); ++k)
        out.emplace_back(names[active[k]], mu[static_cast<int>(k)]);
    return out;
}

void record_move(SelectionResult& result, const SelectionState& st, const RankScore& score,
                 int step) {
    PathEntry e;
    e.step = step;
    e.action = score.direction;
    e.predictor = score.candidate;
    const bool mean_side = score.direction == RankDirection::add_mean ||
                           score.direction == RankDirection::drop_mean;
    e.predictor_name = mean_side ? st.data->mean_names[score.candidate]
                                 : st.data->var_names[score.candidate];
    e.one_step_total = score.total;
    e.exact_total = st.elbo + st.log_prior;
    e.elbo = st.elbo;
    e.log_prior = st.log_prior;
    e.mean_coef = coef_snapshot(*st.data, st.index.mean_active, st.fit.mu_beta_q, true);
    e.var_coef = coef_snapshot(*st.data, st.index.var_active, st.fit.mu_alpha_q, false);
    result.path.push_back(std::move(e));
}

// Homoscedastic ranking: on a unit-sum-of-squares design the one-step total
// orders candidates exactly like the residual correlation, so the sweep uses
// the correlation statistic and computes the full score only for the winner.
std::optional<RankScore> best_mean_add(const SelectionState& st, const std::vector<int>& pool,
                                       const SelectionConfig& config) {
    if (pool.empty()) return std::nullopt;
    if (!config.homoscedastic)
        return best_candidate(pool, [&](int j) { return rank_mean_add(st, j, config); });
    const VectorXd resid = st.residuals();
    int best_j = -1;
    double best_corr = -1.0;
    for (int j : pool) {
        const double corr = std::abs(st.data->X.col(j).dot(resid));
        if (corr > best_corr + 1e-12) {
            best_corr = corr;
            best_j = j;
        }
    }
    return rank_mean_add(st, best_j, config);
}

}  // namespace

SelectionResult forward_var(const DesignData& data, const SelectionConfig& config) {
    data.check();
    if (config.restricted) {
        if (data.p() != data.q() || data.mean_names != data.var_names)
            throw DataError("restricted variance search requires identical mean and variance designs");
    }
    if (config.homoscedastic) {
        for (int j = 0; j < data.p(); ++j) {
            if (data.intercept_mean_col && j == *data.intercept_mean_col) continue;
            const double ss = data.X.col(j).squaredNorm();
            if (std::abs(ss - data.n()) > 1e-6 * data.n())
                throw DataError("homoscedastic selection requires a unit-sum-of-squares design; "
                                "column \"" + data.mean_names[j] + "\" is not standardized");
        }
    }
    SelectionResult result;
    SelectionState st = make_state(data, intercept_only_index(data), config);
    int step = 0;
    for (; step < config.max_steps; ++step) {
        bool changed = false;

        std::vector<int> mean_pool;
        for (int j = 0; j < data.p(); ++j)
            if (!(data.intercept_mean_col && j == *data.intercept_mean_col) &&
                !st.index.mean_contains(j))
                mean_pool.push_back(j);
        if (auto cand = best_mean_add(st, mean_pool, config)) {
            ModelIndex trial_idx = st.index;
            trial_idx.mean_active.push_back(cand->candidate);
            SelectionState trial = make_state(data, trial_idx, config);
            if (trial.elbo + trial.log_prior > st.elbo + st.log_prior) {
                st = std::move(trial);
                record_move(result, st, *cand, step + 1);
                changed = true;
            }
        }

        if (!config.homoscedastic) {
            std::vector<int> var_pool;
            if (config.restricted) {
                for (int j : st.index.mean_active)
                    if (!(data.intercept_var_col && j == *data.intercept_var_col) &&
                        !(data.intercept_mean_col && j == *data.intercept_mean_col) &&
                        j < data.q() && !st.index.var_contains(j))
                        var_pool.push_back(j);
            } else {
                for (int j = 0; j < data.q(); ++j)
                    if (!(data.intercept_var_col && j == *data.intercept_var_col) &&
                        !st.index.var_contains(j))
                        var_pool.push_back(j);
            }
            std::sort(var_pool.begin(), var_pool.end());
            if (auto cand = best_candidate(var_pool,
                                           [&](int j) { return rank_var_add(st, j, config); })) {
                ModelIndex trial_idx = st.index;
                trial_idx.var_active.push_back(cand->candidate);
                SelectionState trial = make_state(data, trial_idx, config);
                if (trial.elbo + trial.log_prior > st.elbo + st.log_prior) {
                    st = std::move(trial);
                    record_move(result, st, *cand, step + 1);
                    changed = true;
                }
            }
        }

        if (!changed) break;
    }
    result.forward_iterations = step + (step < config.max_steps ? 1 : 0);
    result.index = st.index;
    result.fit = st.fit;
    result.sigma2_beta = st.sigma2_beta;
    result.sigma2_alpha = st.sigma2_alpha;
    result.elbo = st.elbo;
    result.log_prior = st.log_prior;
    result.stopped_reason = step < config.max_steps ? "no_improving_move" : "max_steps";
    return result;
}

SelectionResult forward_backward_var(const DesignData& data, const SelectionConfig& config) {
    SelectionResult result = forward_var(data, config);
    SelectionState st = make_state(data, result.index, config);
    int step = result.forward_iterations;
    for (int guard = 0; guard < config.max_steps; ++guard) {
        bool changed = false;
        ++step;

        std::vector<int> drop_mean_pool;
        for (int j : st.index.mean_active)
            if (!(data.intercept_mean_col && j == *data.intercept_mean_col))
                drop_mean_pool.push_back(j);
        std::sort(drop_mean_pool.begin(), drop_mean_pool.end());
        if (auto cand = best_candidate(drop_mean_pool,
                                       [&](int j) { return rank_mean_drop(st, j, config); })) {
            ModelIndex trial_idx = st.index;
            auto& ma = trial_idx.mean_active;
            ma.erase(std::remove(ma.begin(), ma.end(), cand->candidate), ma.end());
            if (config.restricted) {
                auto& va = trial_idx.var_active;
                va.erase(std::remove(va.begin(), va.end(), cand->candidate), va.end());
            }
            SelectionState trial = make_state(data, trial_idx, config);
            if (trial.elbo + trial.log_prior > st.elbo + st.log_prior) {
                st = std::move(trial);
                record_move(result, st, *cand, step);
                changed = true;
            }
        }

        if (!config.homoscedastic) {
            std::vector<int> drop_var_pool;
            for (int j : st.index.var_active)
                if (!(data.intercept_var_col && j == *data.intercept_var_col))
                    drop_var_pool.push_back(j);
            std::sort(drop_var_pool.begin(), drop_var_pool.end());
            if (auto cand = best_candidate(drop_var_pool,
                                           [&](int j) { return rank_var_drop(st, j, config); })) {
                ModelIndex trial_idx = st.index;
                auto& va = trial_idx.var_active;
                va.erase(std::remove(va.begin(), va.end(), cand->candidate), va.end());
                SelectionState trial = make_state(data, trial_idx, config);
                if (trial.elbo + trial.log_prior > st.elbo + st.log_prior) {
                    st = std::move(trial);
                    record_move(result, st, *cand, step);
                    changed = true;
                }
            }
        }

        if (!changed) break;
    }
    result.index = st.index;
    result.fit = st.fit;
    result.sigma2_beta = st.sigma2_beta;
    result.sigma2_alpha = st.sigma2_alpha;
    result.elbo = st.elbo;
    result.log_prior = st.log_prior;
    return result;
}

void write_path_csv(const std::string& path, const SelectionResult& result) {
    std::vector<std::vector<std::string>> rows;
    auto action_name = [](RankDirection d) {
        switch (d) {
            case RankDirection::add_mean: return "add_mean";
            case RankDirection::add_var: return "add_var";
            case RankDirection::drop_mean: return "drop_mean";
            case RankDirection::drop_var: return "drop_var";
        }
        return "?";
    };
    auto snapshot = [](const std::vector<std::pair<std::string, double>>& coef) {
        std::string s;
        for (size_t k = 0; k < coef.size(); ++k) {
            if (k) s += "|";
            s += coef[k].first + "=" + csv::format_double(coef[k].second);
        }
        return s;
    };
    for (const auto& e : result.path) {
        rows.push_back({std::to_string(e.step), action_name(e.action), e.predictor_name,
                        csv::format_double(e.one_step_total), csv::format_double(e.exact_total),
                        csv::format_double(e.elbo), csv::format_double(e.log_prior),
                        snapshot(e.mean_coef), snapshot(e.var_coef)});
    }
    csv::write_file(path,
                    {"step", "action", "predictor", "one_step_score", "exact_score", "elbo",
                     "log_prior", "mean_coefficients", "var_coefficients"},
                    rows);
}

}  // namespace hetvar
