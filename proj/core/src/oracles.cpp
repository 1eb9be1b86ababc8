#include "hetvar/oracles.hpp"

#include <cmath>

#include "hetvar/csv.hpp"
#include "hetvar/rng.hpp"
#include "hetvar/vb_engine.hpp"

namespace hetvar::oracle {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_mvn(const VectorXd& x, const VectorXd& mu, const Eigen::LLT<MatrixXd>& llt,
               double logdet) {
    const VectorXd d = x - mu;
    return -0.5 * d.size() * kLog2Pi - 0.5 * logdet - 0.5 * d.dot(llt.solve(d));
}

double log_likelihood(const DesignData& data, const VectorXd& beta, const VectorXd& alpha) {
    double s = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double la = data.Z.row(i) * alpha;
        const double r = data.y[i] - data.X.row(i) * beta;
        s += -0.5 * kLog2Pi - 0.5 * la - 0.5 * r * r * std::exp(-la);
    }
    return s;
}

struct MvnSampler {
    VectorXd mu;
    MatrixXd chol;
    Eigen::LLT<MatrixXd> llt;
    double logdet;

    explicit MvnSampler(const VectorXd& m, const MatrixXd& sigma)
        : mu(m), llt(cholesky_spd(sigma, 1e-12, "sampler covariance")) {
        chol = llt.matrixL();
        logdet = 2.0 * chol.diagonal().array().log().sum();
    }
    VectorXd draw(Rng& rng) const {
        VectorXd z(mu.size());
        for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
        return mu + chol * z;
    }
    double logpdf(const VectorXd& x) const { return log_mvn(x, mu, llt, logdet); }
};

McEstimate summarize(const std::vector<double>& vals) {
    McEstimate e;
    const double n = static_cast<double>(vals.size());
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    e.estimate = mean;
    e.stderr_ = std::sqrt(var / n);
    return e;
}

}  // namespace

McEstimate mc_elbo(const DesignData& data, const PriorSpec& prior, const VariationalFit& fit,
                   long n_samples, std::uint64_t seed) {
    if (n_samples < 1000) throw DataError("mc_elbo needs at least 1000 samples");
    const MvnSampler qb(fit.mu_beta_q, fit.Sigma_beta_q);
    const MvnSampler qa(fit.mu_alpha_q, fit.Sigma_alpha_q);
    const MvnSampler pb(prior.mu_beta0, prior.Sigma_beta0);
    const MvnSampler pa(prior.mu_alpha0, prior.Sigma_alpha0);
    Rng rng(seed);
    std::vector<double> vals(n_samples);
    for (long s = 0; s < n_samples; ++s) {
        const VectorXd beta = qb.draw(rng);
        const VectorXd alpha = qa.draw(rng);
        vals[s] = pb.logpdf(beta) + pa.logpdf(alpha) + log_likelihood(data, beta, alpha) -
                  qb.logpdf(beta) - qa.logpdf(alpha);
    }
    return summarize(vals);
}

McTerms mc_elbo_terms(const DesignData& data, const PriorSpec& prior,
                      const VariationalFit& fit, long n_samples, std::uint64_t seed) {
    if (n_samples < 1000) throw DataError("mc_elbo_terms needs at least 1000 samples");
    const MvnSampler qb(fit.mu_beta_q, fit.Sigma_beta_q);
    const MvnSampler qa(fit.mu_alpha_q, fit.Sigma_alpha_q);
    const MvnSampler pb(prior.mu_beta0, prior.Sigma_beta0);
    const MvnSampler pa(prior.mu_alpha0, prior.Sigma_alpha0);
    Rng rng(seed);
    std::vector<double> v1(n_samples), v2(n_samples), v3(n_samples);
    for (long s = 0; s < n_samples; ++s) {
        const VectorXd beta = qb.draw(rng);
        const VectorXd alpha = qa.draw(rng);
        v1[s] = pb.logpdf(beta) + pa.logpdf(alpha);
        v2[s] = log_likelihood(data, beta, alpha);
        v3[s] = -(qb.logpdf(beta) + qa.logpdf(alpha));
    }
    return {summarize(v1), summarize(v2), summarize(v3)};
}

namespace {

// Gauss-Hermite nodes and weights (weight exp(-t^2)) via the Golub-Welsch
// symmetric tridiagonal eigenproblem.
void gauss_hermite(int n, VectorXd& nodes, VectorXd& weights) {
    MatrixXd jac = MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double off = std::sqrt(i / 2.0);
        jac(i, i - 1) = off;
        jac(i - 1, i) = off;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(jac);
    nodes = es.eigenvalues();
    weights.resize(n);
    const double sqrt_pi = std::sqrt(M_PI);
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        weights[i] = sqrt_pi * v0 * v0;
    }
}

struct JointPosterior {
    const DesignData& data;
    const PriorSpec& prior;
    Eigen::LLT<MatrixXd> llt_b0, llt_a0;
    double logdet_b0, logdet_a0;
    int p, q;

    JointPosterior(const DesignData& d, const PriorSpec& pr)
        : data(d),
          prior(pr),
          llt_b0(cholesky_spd(pr.Sigma_beta0, 1e-12, "Sigma_beta0")),
          llt_a0(cholesky_spd(pr.Sigma_alpha0, 1e-12, "Sigma_alpha0")),
          p(d.p()),
          q(d.q()) {
        logdet_b0 = 2.0 * llt_b0.matrixL().toDenseMatrix().diagonal().array().log().sum();
        logdet_a0 = 2.0 * llt_a0.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

    double operator()(const VectorXd& theta) const {
        const VectorXd beta = theta.head(p);
        const VectorXd alpha = theta.tail(q);
        return log_mvn(beta, prior.mu_beta0, llt_b0, logdet_b0) +
               log_mvn(alpha, prior.mu_alpha0, llt_a0, logdet_a0) +
               log_likelihood(data, beta, alpha);
    }

    VectorXd gradient(const VectorXd& theta) const {
        const VectorXd beta = theta.head(p);
        const VectorXd alpha = theta.tail(q);
        VectorXd g(p + q);
        g.head(p) = -llt_b0.solve(beta - prior.mu_beta0);
        g.tail(q) = -llt_a0.solve(alpha - prior.mu_alpha0);
        for (int i = 0; i < data.n(); ++i) {
            const double la = data.Z.row(i) * alpha;
            const double r = data.y[i] - data.X.row(i) * beta;
            const double e = std::exp(-la);
            g.head(p) += data.X.row(i).transpose() * (r * e);
            g.tail(q) += data.Z.row(i).transpose() * (-0.5 + 0.5 * r * r * e);
        }
        return g;
    }

    MatrixXd neg_hessian(const VectorXd& theta) const {
        const VectorXd beta = theta.head(p);
        const VectorXd alpha = theta.tail(q);
        MatrixXd h = MatrixXd::Zero(p + q, p + q);
        h.topLeftCorner(p, p) = llt_b0.solve(MatrixXd::Identity(p, p));
        h.bottomRightCorner(q, q) = llt_a0.solve(MatrixXd::Identity(q, q));
        for (int i = 0; i < data.n(); ++i) {
            const double la = data.Z.row(i) * alpha;
            const double r = data.y[i] - data.X.row(i) * beta;
            const double e = std::exp(-la);
            h.topLeftCorner(p, p) += e * data.X.row(i).transpose() * data.X.row(i);
            h.bottomRightCorner(q, q) +=
                0.5 * r * r * e * data.Z.row(i).transpose() * data.Z.row(i);
            h.topRightCorner(p, q) += r * e * data.X.row(i).transpose() * data.Z.row(i);
        }
        h.bottomLeftCorner(q, p) = h.topRightCorner(p, q).transpose();
        return h;
    }
};

}  // namespace

double log_evidence_quadrature(const DesignData& data, const PriorSpec& prior,
                               int nodes_per_dim) {
    const int d = data.p() + data.q();
    if (d > 4) throw DataError("quadrature oracle supports p + q <= 4 only");
    prior.check(data.p(), data.q());
    const JointPosterior post(data, prior);

    // Posterior mode by damped Newton. Away from the mode the negated
    // Hessian can be indefinite, so escalate a Levenberg-style diagonal bump
    // until it factors.
    VectorXd theta(d);
    theta.head(data.p()) = prior.mu_beta0;
    theta.tail(data.q()) = prior.mu_alpha0;
    double f = post(theta);
    for (int it = 0; it < 200; ++it) {
        const VectorXd g = post.gradient(theta);
        if (g.lpNorm<Eigen::Infinity>() < 1e-10) break;
        const MatrixXd h = post.neg_hessian(theta);
        VectorXd step;
        double damp = 0.0;
        for (;;) {
            MatrixXd hd = h;
            hd.diagonal().array() += damp;
            Eigen::LLT<MatrixXd> llt(hd);
            if (llt.info() == Eigen::Success) {
                step = llt.solve(g);
                break;
            }
            damp = damp == 0.0 ? 1e-8 : damp * 100.0;
            if (damp > 1e12) throw SolverError("posterior curvature unusable");
        }
        double t = 1.0;
        VectorXd trial = theta + step;
        double ft = post(trial);
        while (ft < f && t > 1e-10) {
            t *= 0.5;
            trial = theta + t * step;
            ft = post(trial);
        }
        theta = trial;
        f = ft;
    }

    // theta = mode + sqrt(2) * L^-T t transforms the GH weight to the
    // posterior's local scale; A = L^-T with H = L L'.
    const MatrixXd h = post.neg_hessian(theta);
    const MatrixXd lmat = cholesky_spd(h, 1e-10, "posterior curvature").matrixL();
    const MatrixXd a =
        lmat.transpose().triangularView<Eigen::Upper>().solve(MatrixXd::Identity(d, d));
    const double logdet_a = -lmat.diagonal().array().log().sum();

    VectorXd nodes, weights;
    gauss_hermite(nodes_per_dim, nodes, weights);
    const VectorXd logw = weights.array().log();

    std::vector<int> idx(d, 0);
    double max_exponent = -std::numeric_limits<double>::infinity();
    std::vector<double> exponents;
    exponents.reserve(static_cast<size_t>(std::pow(nodes_per_dim, d)));
    const double sqrt2 = std::sqrt(2.0);
    while (true) {
        VectorXd t(d);
        double lw = 0.0, t2 = 0.0;
        for (int k = 0; k < d; ++k) {
            t[k] = nodes[idx[k]];
            lw += logw[idx[k]];
            t2 += t[k] * t[k];
        }
        const VectorXd th = theta + sqrt2 * (a * t);
        const double ex = post(th) + t2 + lw;
        exponents.push_back(ex);
        if (ex > max_exponent) max_exponent = ex;
        int k = 0;
        for (; k < d; ++k) {
            if (++idx[k] < nodes_per_dim) break;
            idx[k] = 0;
        }
        if (k == d) break;
    }
    double acc = 0.0;
    for (double ex : exponents) acc += std::exp(ex - max_exponent);
    return max_exponent + std::log(acc) + 0.5 * d * std::log(2.0) + logdet_a;
}

double conjugate_log_evidence(const DesignData& data, const PriorSpec& prior, double alpha0) {
    const double s2 = std::exp(alpha0);
    const MatrixXd cov = s2 * MatrixXd::Identity(data.n(), data.n()) +
                         data.X * prior.Sigma_beta0 * data.X.transpose();
    const auto llt = cholesky_spd(cov, 1e-12, "conjugate covariance");
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return log_mvn(data.y, data.X * prior.mu_beta0, llt, logdet);
}

ExhaustiveResult exhaustive_search(const DesignData& data, const SelectionConfig& config,
                                   int max_universe) {
    data.check();
    if (!data.intercept_mean_col || !data.intercept_var_col)
        throw DataError("exhaustive search requires flagged intercepts");
    std::vector<int> mean_cand, var_cand;
    for (int j = 0; j < data.p(); ++j)
        if (j != *data.intercept_mean_col) mean_cand.push_back(j);
    for (int j = 0; j < data.q(); ++j)
        if (j != *data.intercept_var_col) var_cand.push_back(j);
    if (static_cast<int>(mean_cand.size() + var_cand.size()) > max_universe)
        throw DataError("candidate universe too large for exhaustive search");

    ExhaustiveResult out;
    out.best_score = -std::numeric_limits<double>::infinity();
    const int pm = static_cast<int>(mean_cand.size()), pv = static_cast<int>(var_cand.size());
    for (int mc = 0; mc < (1 << pm); ++mc) {
        for (int vc = 0; vc < (1 << pv); ++vc) {
            ModelIndex idx;
            idx.mean_active.push_back(*data.intercept_mean_col);
            idx.var_active.push_back(*data.intercept_var_col);
            for (int k = 0; k < pm; ++k)
                if (mc & (1 << k)) idx.mean_active.push_back(mean_cand[k]);
            for (int k = 0; k < pv; ++k)
                if (vc & (1 << k)) idx.var_active.push_back(var_cand[k]);
            if (config.restricted) {
                bool ok = true;
                for (int j : idx.var_active)
                    if (j != *data.intercept_var_col && !idx.mean_contains(j)) ok = false;
                if (!ok) continue;
            }
            const SelectionState st = make_state(data, idx, config);
            ++out.models_fitted;
            const double score = st.elbo + st.log_prior;
            if (score > out.best_score) {
                out.best_score = score;
                out.best_index = idx;
            }
        }
    }
    return out;
}

VectorXd finite_diff_grad(const std::function<double(const VectorXd&)>& f,
                          const VectorXd& point, double step) {
    if (step <= 0.0) throw DataError("finite difference step must be positive");
    VectorXd g(point.size());
    VectorXd x = point;
    for (int i = 0; i < point.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + step;
        const double fp = f(x);
        x[i] = x0 - step;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

std::pair<double, double> grid_max_1d(const std::function<double(double)>& f, double lo,
                                      double hi, double resolution) {
    if (!(hi > lo) || resolution <= 0.0) throw DataError("bad bracket or resolution");
    const int n = std::max(8, static_cast<int>(std::ceil((hi - lo) / resolution)));
    double best_x = lo, best_f = f(lo);
    for (int i = 1; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double fx = f(x);
        if (fx > best_f) {
            best_f = fx;
            best_x = x;
        }
    }
    // golden-section refinement on the bracketing cells
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::max(lo, best_x - (hi - lo) / n);
    double b = std::min(hi, best_x + (hi - lo) / n);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > resolution * 1e-3; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    const double xm = 0.5 * (a + b);
    return {xm, f(xm)};
}

OracleReport OracleReport::make(std::string name, std::string instance, double primary,
                                double oracle, double tolerance) {
    OracleReport r;
    r.name = std::move(name);
    r.instance = std::move(instance);
    r.primary = primary;
    r.oracle = oracle;
    r.discrepancy = std::abs(primary - oracle);
    r.tolerance = tolerance;
    r.pass = r.discrepancy <= tolerance;
    return r;
}

void write_reports_csv(const std::string& path, const std::vector<OracleReport>& reports) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports)
        rows.push_back({r.name, r.instance, csv::format_double(r.primary),
                        csv::format_double(r.oracle), csv::format_double(r.discrepancy),
                        csv::format_double(r.tolerance), r.pass ? "1" : "0"});
    csv::write_file(path, {"name", "instance", "primary", "oracle", "discrepancy",
                           "tolerance", "pass"},
                    rows);
}

}  // namespace hetvar::oracle
