#include "hetvar/simulate.hpp"

#include <cmath>
#include <atomic>
#include <thread>

#include "hetvar/csv.hpp"
#include "hetvar/dataset.hpp"
#include "hetvar/rng.hpp"

namespace hetvar {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

MatrixXd correlated_normals(int n, int k, double decay, Rng& rng) {
    MatrixXd sigma(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) sigma(i, j) = std::pow(decay, std::abs(i - j));
    const MatrixXd chol = cholesky_spd(sigma, 1e-12, "simulation correlation").matrixL();
    MatrixXd x(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) x(i, j) = rng.normal();
    return x * chol.transpose();
}

DesignData assemble(const MatrixXd& x, const VectorXd& y) {
    const int n = static_cast<int>(x.rows()), k = static_cast<int>(x.cols());
    DesignData d;
    d.y = y;
    d.X.resize(n, k + 1);
    d.X.col(0).setOnes();
    d.X.rightCols(k) = x;
    d.Z = d.X;
    d.mean_names.push_back("(intercept)");
    for (int j = 0; j < k; ++j) d.mean_names.push_back("x" + std::to_string(j + 1));
    d.var_names = d.mean_names;
    d.intercept_mean_col = 0;
    d.intercept_var_col = 0;
    return d;
}

}  // namespace

void SimulationSpec::check() const {
    if (beta_tilde.size() != alpha_tilde.size() || beta_tilde.size() < 1)
        throw DataError("beta_tilde and alpha_tilde must have equal positive length");
    if (sigma <= 0.0) throw DataError("sigma must be positive");
    if (n_train < 1 || n_valid < 0) throw DataError("bad sample sizes");
    if (correlation_decay < 0.0 || correlation_decay >= 1.0)
        throw DataError("correlation decay must lie in [0,1)");
}

SimulatedData simulate_hetero(const SimulationSpec& spec, std::uint64_t seed) {
    spec.check();
    const int k = static_cast<int>(spec.beta_tilde.size());
    Rng rng(seed);
    auto draw = [&](int n) {
        MatrixXd x = correlated_normals(n, k, spec.correlation_decay, rng);
        if (spec.transform_to_unit)
            for (int i = 0; i < x.rows(); ++i)
                for (int j = 0; j < k; ++j) x(i, j) = normal_cdf(x(i, j));
        VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            const double loc = spec.intercept_mean + x.row(i).dot(spec.beta_tilde);
            const double scale =
                spec.sigma * std::exp(0.5 * x.row(i).dot(spec.alpha_tilde));
            y[i] = loc + scale * rng.normal();
        }
        return assemble(x, y);
    };
    SimulatedData out{draw(spec.n_train), draw(spec.n_valid), {}};
    out.truth.mean_active.push_back(0);
    out.truth.var_active.push_back(0);
    for (int j = 0; j < k; ++j) {
        if (spec.beta_tilde[j] != 0.0) out.truth.mean_active.push_back(j + 1);
        if (spec.alpha_tilde[j] != 0.0) out.truth.var_active.push_back(j + 1);
    }
    return out;
}

namespace {

ReplicationRow run_replication(const SimulationSpec& spec, const SelectionConfig& selector,
                               std::uint64_t master_seed, int rep) {
    ReplicationRow row;
    row.seed = master_seed + static_cast<std::uint64_t>(rep);
    try {
        const std::uint64_t rep_seed = Rng::split(master_seed, static_cast<std::uint64_t>(rep))
                                           .next_u64();
        row.seed = rep_seed;
        SimulatedData sim = simulate_hetero(spec, rep_seed);
        auto [train_std, scaling] = standardize(sim.train, StandardizePolicy::unit_ss);

        const SelectionResult sel = selector.backward
                                        ? forward_backward_var(train_std, selector)
                                        : forward_var(train_std, selector);

        const FitClassification cls = classify_fit(sel.index, sim.truth, train_std);
        row.correct_mean = cls.correct_mean;
        row.correct_var = cls.correct_var;
        row.nzc_mean = cls.nzc_mean;
        row.nzc_var = cls.nzc_var;

        // Map active coefficients back to the raw predictor scale.
        const int k = static_cast<int>(spec.beta_tilde.size());
        VectorXd beta_full = VectorXd::Zero(k + 1);
        for (size_t idx = 0; idx < sel.index.mean_active.size(); ++idx)
            beta_full[sel.index.mean_active[idx]] = sel.fit.mu_beta_q[static_cast<int>(idx)];
        VectorXd shift_full = VectorXd::Zero(k + 1), scale_full = VectorXd::Ones(k + 1);
        shift_full = scaling.shift_x;
        scale_full = scaling.scale_x;
        const VectorXd beta_raw = unscale_coefficients(beta_full, shift_full, scale_full, 0);
        row.coef_mse = (beta_raw.tail(k) - spec.beta_tilde).squaredNorm();

        // Validation scores use the fitted model on the training scaling.
        const DesignData valid_std = scaling.apply(sim.valid);
        DesignData valid_active;
        valid_active.y = valid_std.y;
        valid_active.X.resize(valid_std.n(), static_cast<Eigen::Index>(sel.index.mean_active.size()));
        for (size_t idx = 0; idx < sel.index.mean_active.size(); ++idx)
            valid_active.X.col(static_cast<Eigen::Index>(idx)) =
                valid_std.X.col(sel.index.mean_active[idx]);
        valid_active.Z.resize(valid_std.n(), static_cast<Eigen::Index>(sel.index.var_active.size()));
        for (size_t idx = 0; idx < sel.index.var_active.size(); ++idx)
            valid_active.Z.col(static_cast<Eigen::Index>(idx)) =
                valid_std.Z.col(sel.index.var_active[idx]);
        valid_active.mean_names.assign(sel.index.mean_active.size(), "");
        valid_active.var_names.assign(sel.index.var_active.size(), "");

        row.mse = mse(valid_active.X * sel.fit.mu_beta_q, valid_std.y);
        row.pps = pps(sel.fit, valid_active);
    } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
    }
    return row;
}

}  // namespace

StudySummary replicate_study(const SimulationSpec& spec, int replications,
                             const SelectionConfig& selector, std::uint64_t master_seed,
                             int threads) {
    if (replications < 1) throw DataError("replications must be >= 1");
    StudySummary s;
    s.replications = replications;
    s.rows.resize(replications);

    if (threads <= 1) {
        for (int r = 0; r < replications; ++r)
            s.rows[r] = run_replication(spec, selector, master_seed, r);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (int r = next.fetch_add(1); r < replications; r = next.fetch_add(1))
                    s.rows[r] = run_replication(spec, selector, master_seed, r);
            });
        for (auto& th : pool) th.join();
    }

    int ok = 0;
    double cm = 0, cv = 0, nm = 0, nv = 0, ms = 0, pp = 0, cmse = 0;
    for (const auto& row : s.rows) {
        if (row.failed) continue;
        ++ok;
        cm += row.correct_mean;
        cv += row.correct_var;
        nm += row.nzc_mean;
        nv += row.nzc_var;
        ms += row.mse;
        pp += row.pps;
        cmse += row.coef_mse;
    }
    if (ok == 0) throw SolverError("every replication failed");
    s.cfr_mean = 100.0 * cm / ok;
    s.cfr_var = 100.0 * cv / ok;
    s.nzc_mean = nm / ok;
    s.nzc_var = nv / ok;
    s.mse = ms / ok;
    s.pps = pp / ok;
    s.coef_mse = cmse / ok;

    auto sd = [&](auto get, double mean) {
        if (ok < 2) return 0.0;
        double acc = 0.0;
        for (const auto& row : s.rows)
            if (!row.failed) acc += (get(row) - mean) * (get(row) - mean);
        return std::sqrt(acc / (ok - 1));
    };
    s.sd_nzc_mean = sd([](const ReplicationRow& r) { return double(r.nzc_mean); }, s.nzc_mean);
    s.sd_nzc_var = sd([](const ReplicationRow& r) { return double(r.nzc_var); }, s.nzc_var);
    s.sd_mse = sd([](const ReplicationRow& r) { return r.mse; }, s.mse);
    s.sd_pps = sd([](const ReplicationRow& r) { return r.pps; }, s.pps);
    return s;
}

void write_study_csv(const std::string& path, const StudySummary& summary) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : summary.rows) {
        rows.push_back({std::to_string(r.seed), r.failed ? "1" : "0",
                        std::to_string(int(r.correct_mean)), std::to_string(int(r.correct_var)),
                        std::to_string(r.nzc_mean), std::to_string(r.nzc_var),
                        csv::format_double(r.mse), csv::format_double(r.pps),
                        csv::format_double(r.coef_mse)});
    }
    rows.push_back({"summary", "0", csv::format_double(summary.cfr_mean),
                    csv::format_double(summary.cfr_var), csv::format_double(summary.nzc_mean),
                    csv::format_double(summary.nzc_var), csv::format_double(summary.mse),
                    csv::format_double(summary.pps), csv::format_double(summary.coef_mse)});
    csv::write_file(path,
                    {"seed", "failed", "correct_mean", "correct_var", "nzc_mean", "nzc_var",
                     "mse", "pps", "coef_mse"},
                    rows);
}

}  // namespace hetvar
