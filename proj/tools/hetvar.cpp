// hetvar: fit and select heteroscedastic linear models from the command line.
//
// Verbs: fit, select, simulate, study, evaluate, paths. Outputs are CSV and
// written atomically (temp file + rename). Exit codes: 0 success, 1 data
// error, 2 solver non-convergence (partial trace still written).

#include <CLI11.hpp>
#include <cstdlib>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hetvar/csv.hpp"
#include "hetvar/dataset.hpp"
#include "hetvar/homoscedastic.hpp"
#include "hetvar/metrics.hpp"
#include "hetvar/oracles.hpp"
#include "hetvar/selection.hpp"
#include "hetvar/simulate.hpp"
#include "hetvar/vb_engine.hpp"

namespace {

using namespace hetvar;

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

VectorXd parse_vector(const std::string& s) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        vals.push_back(std::stod(item));
    }
    VectorXd v(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) v[static_cast<int>(i)] = vals[i];
    return v;
}

struct DataFlags {
    std::string data_path;
    std::string response;
    std::string mean_cols;
    std::string var_cols;
    std::string policy = "none";
    bool no_intercepts = false;

    void attach(CLI::App* cmd, bool require_data = true) {
        auto* d = cmd->add_option("--data", data_path, "input CSV (header row, comma separated)");
        if (require_data) d->required();
        cmd->add_option("--response", response, "response column name")->required();
        cmd->add_option("--mean", mean_cols, "comma-separated mean predictors (default: all)");
        cmd->add_option("--var", var_cols, "comma-separated variance predictors (default: mean)");
        cmd->add_option("--policy", policy, "standardization: none|unit_ss|zscore")
            ->check(CLI::IsMember({"none", "unit_ss", "zscore"}));
        cmd->add_flag("--no-intercepts", no_intercepts, "do not append intercept columns");
    }

    std::pair<DesignData, ScalingInfo> load() const {
        ColumnRoles roles;
        roles.response = response;
        roles.mean_predictors = split_names(mean_cols);
        roles.var_predictors = split_names(var_cols);
        roles.add_intercepts = !no_intercepts;
        const csv::Table table = csv::read_file(data_path);
        DesignData d = validate_dataset(table, roles);
        StandardizePolicy p = StandardizePolicy::none;
        if (policy == "unit_ss") p = StandardizePolicy::unit_ss;
        if (policy == "zscore") p = StandardizePolicy::zscore;
        return standardize(d, p);
    }
};

struct SolverFlags {
    double elbo_tol = 1e-6;
    int max_iters = 200;
    double newton_tol = 1e-10;
    double prior_var_beta = 1000.0;
    double prior_var_alpha = 1000.0;
    bool shrink = false;
    double shrink_a = 0.01;
    double shrink_b = 0.01;
    bool homoscedastic = false;
    std::string alpha_update = "block";

    void attach(CLI::App* cmd) {
        cmd->add_option("--elbo-tol", elbo_tol, "outer-loop stopping tolerance");
        cmd->add_option("--max-iters", max_iters, "maximum outer iterations");
        cmd->add_option("--newton-tol", newton_tol, "Newton gradient tolerance");
        cmd->add_option("--prior-var-beta", prior_var_beta, "isotropic prior variance for beta");
        cmd->add_option("--prior-var-alpha", prior_var_alpha, "isotropic prior variance for alpha");
        cmd->add_flag("--shrink", shrink, "estimate the prior scales by IG(a,b) shrinkage");
        cmd->add_option("--shrink-a", shrink_a, "inverse-gamma shape");
        cmd->add_option("--shrink-b", shrink_b, "inverse-gamma scale");
        cmd->add_flag("--homoscedastic", homoscedastic, "constant-variance fast path");
        cmd->add_option("--alpha-update", alpha_update, "alpha step: block|one_shot")
            ->check(CLI::IsMember({"block", "one_shot"}));
    }

    SolverConfig solver() const {
        SolverConfig cfg;
        cfg.elbo_tol = elbo_tol;
        cfg.max_outer_iters = max_iters;
        cfg.newton_tol = newton_tol;
        cfg.homoscedastic = homoscedastic;
        cfg.alpha_update = alpha_update == "block" ? AlphaUpdate::block : AlphaUpdate::one_shot;
        return cfg;
    }
    PriorSpec prior(int p, int q) const {
        return PriorSpec::isotropic_prior(p, q, prior_var_beta, prior_var_alpha, shrink,
                                          shrink_a, shrink_b);
    }
};

void write_trace_csv(const std::string& path, const FitTrace& trace) {
    std::vector<std::vector<std::string>> rows;
    for (size_t i = 0; i < trace.elbo_per_iteration.size(); ++i)
        rows.push_back({std::to_string(i + 1), csv::format_double(trace.elbo_per_iteration[i]),
                        trace.alpha_update_accepted[i] ? "1" : "0"});
    csv::write_file(path, {"iteration", "elbo", "alpha_accepted"}, rows);
}

void write_coef_csv(const std::string& path, const DesignData& data, const ScalingInfo& scaling,
                    const std::vector<int>& mean_active, const std::vector<int>& var_active,
                    const VariationalFit& fit) {
    auto unscale_block = [&](const std::vector<int>& active, const VectorXd& mu,
                             const MatrixXd& sigma, const VectorXd& shift,
                             const VectorXd& scale, std::optional<int> icol_full) {
        // expand active coefficients into the full design, unscale, re-extract
        VectorXd mu_full = VectorXd::Zero(shift.size());
        VectorXd sd_full = VectorXd::Zero(shift.size());
        for (size_t k = 0; k < active.size(); ++k) {
            mu_full[active[k]] = mu[static_cast<int>(k)];
            sd_full[active[k]] = std::sqrt(sigma(static_cast<int>(k), static_cast<int>(k)));
        }
        VectorXd raw = unscale_coefficients(mu_full, shift, scale, icol_full);
        for (int j = 0; j < sd_full.size(); ++j)
            if (!(icol_full && *icol_full == j)) sd_full[j] *= scale[j];
        return std::pair<VectorXd, VectorXd>{raw, sd_full};
    };
    auto [mb, sb] = unscale_block(mean_active, fit.mu_beta_q, fit.Sigma_beta_q,
                                  scaling.shift_x, scaling.scale_x, data.intercept_mean_col);
    auto [ma, sa] = unscale_block(var_active, fit.mu_alpha_q, fit.Sigma_alpha_q,
                                  scaling.shift_z, scaling.scale_z, data.intercept_var_col);
    std::vector<std::vector<std::string>> rows;
    for (int j : mean_active)
        rows.push_back({data.mean_names[j], csv::format_double(mb[j]),
                        csv::format_double(sb[j]), "mean"});
    for (int j : var_active)
        rows.push_back({data.var_names[j], csv::format_double(ma[j]),
                        csv::format_double(sa[j]), "var"});
    csv::write_file(path, {"name", "mu", "sd", "model"}, rows);
}

std::vector<int> all_columns(int k) {
    std::vector<int> v(k);
    for (int j = 0; j < k; ++j) v[j] = j;
    return v;
}

int run_fit(const DataFlags& df, const SolverFlags& sf, const std::string& out_trace,
            const std::string& out_coef) {
    auto [data, scaling] = df.load();
    DesignData fit_data = data;
    if (sf.homoscedastic) {
        // constant-variance path works on an intercept-only variance design
        fit_data.Z = MatrixXd::Ones(data.n(), 1);
        fit_data.var_names = {"(intercept)"};
        fit_data.intercept_var_col = 0;
    }
    const PriorSpec prior = sf.prior(fit_data.p(), fit_data.q());
    const FitResult res = fit_vb(fit_data, prior, sf.solver());
    if (!out_trace.empty()) write_trace_csv(out_trace, res.trace);
    if (!out_coef.empty()) {
        ScalingInfo sc = scaling;
        if (sf.homoscedastic) {
            sc.shift_z = VectorXd::Zero(1);
            sc.scale_z = VectorXd::Ones(1);
        }
        write_coef_csv(out_coef, fit_data, sc, all_columns(fit_data.p()),
                       all_columns(fit_data.q()), res.fit);
    }
    std::cout << "elbo " << csv::format_double(res.fit.elbo) << " iterations "
              << res.fit.iterations << " converged " << (res.fit.converged ? "yes" : "no")
              << "\n";
    return res.fit.converged ? 0 : 2;
}

struct SelectFlags {
    std::string prior = "ebic";
    double pi_mu = 0.5;
    double pi_sigma = 0.5;
    bool restrict_search = false;
    bool forward_only = false;
    CLI::Option* pi_mu_opt = nullptr;
    CLI::Option* pi_sigma_opt = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--prior", prior, "model prior: ebic|uniform|bernoulli")
            ->check(CLI::IsMember({"ebic", "uniform", "bernoulli"}));
        pi_mu_opt = cmd->add_option("--pi-mu", pi_mu,
                                    "bernoulli inclusion probability, mean model");
        pi_sigma_opt = cmd->add_option("--pi-sigma", pi_sigma,
                                       "bernoulli inclusion probability, variance model");
        cmd->add_flag("--restrict", restrict_search,
                      "limit variance candidates to the mean model");
        cmd->add_flag("--forward-only", forward_only, "skip the backward phase (fVAR)");
    }

    void validate() const {
        if (prior == "bernoulli") {
            if (!pi_mu_opt->count())
                throw DataError("--prior bernoulli requires --pi-mu");
            if (!pi_sigma_opt->count())
                throw DataError("--prior bernoulli requires --pi-sigma");
        }
    }

    ModelPriorPolicy policy() const {
        ModelPriorPolicy p;
        p.kind = prior == "ebic" ? ModelPriorKind::ebic
                 : prior == "uniform" ? ModelPriorKind::uniform
                                      : ModelPriorKind::bernoulli;
        p.pi_mu = pi_mu;
        p.pi_sigma = pi_sigma;
        return p;
    }
};

int run_select(const DataFlags& df, const SolverFlags& sf, const SelectFlags& self,
               const std::string& out_path, const std::string& out_coef,
               const std::string& out_summary) {
    self.validate();
    auto [data, scaling] = df.load();
    SelectionConfig cfg;
    cfg.policy = self.policy();
    cfg.restricted = self.restrict_search;
    cfg.backward = !self.forward_only;
    cfg.homoscedastic = sf.homoscedastic;
    cfg.sigma2_beta0 = sf.prior_var_beta;
    cfg.sigma2_alpha0 = sf.prior_var_alpha;
    cfg.shrink = sf.shrink;
    cfg.solver = sf.solver();

    const SelectionResult res =
        cfg.backward ? forward_backward_var(data, cfg) : forward_var(data, cfg);
    if (!out_path.empty()) write_path_csv(out_path, res);
    if (!out_coef.empty())
        write_coef_csv(out_coef, data, scaling, res.index.mean_active, res.index.var_active,
                       res.fit);
    if (!out_summary.empty()) {
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"elbo", csv::format_double(res.elbo)});
        rows.push_back({"log_prior", csv::format_double(res.log_prior)});
        rows.push_back({"forward_iterations", std::to_string(res.forward_iterations)});
        rows.push_back({"mean_predictors",
                        std::to_string(res.index.mean_active.size() -
                                       (data.intercept_mean_col ? 1 : 0))});
        rows.push_back({"var_predictors",
                        std::to_string(res.index.var_active.size() -
                                       (data.intercept_var_col ? 1 : 0))});
        rows.push_back({"stopped", res.stopped_reason});
        csv::write_file(out_summary, {"key", "value"}, rows);
    }
    std::cout << "selected " << res.index.mean_active.size() << " mean / "
              << res.index.var_active.size() << " variance columns, elbo "
              << csv::format_double(res.elbo) << ", iterations " << res.forward_iterations
              << "\n";
    return 0;
}

void write_design_csv(const std::string& path, const DesignData& d) {
    std::vector<std::string> header;
    header.push_back("y");
    for (size_t j = 0; j < d.mean_names.size(); ++j)
        if (!(d.intercept_mean_col && *d.intercept_mean_col == static_cast<int>(j)))
            header.push_back(d.mean_names[j]);
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < d.n(); ++i) {
        std::vector<std::string> row;
        row.push_back(csv::format_double(d.y[i]));
        for (int j = 0; j < d.p(); ++j)
            if (!(d.intercept_mean_col && *d.intercept_mean_col == j))
                row.push_back(csv::format_double(d.X(i, j)));
        rows.push_back(std::move(row));
    }
    csv::write_file(path, header, rows);
}

int run_simulate(const SimulationSpec& spec, std::uint64_t seed, const std::string& out_train,
                 const std::string& out_valid) {
    const SimulatedData sim = simulate_hetero(spec, seed);
    if (!out_train.empty()) write_design_csv(out_train, sim.train);
    if (!out_valid.empty() && spec.n_valid > 0) write_design_csv(out_valid, sim.valid);
    std::cout << "simulated n_train " << sim.train.n() << " n_valid " << sim.valid.n()
              << " predictors " << spec.beta_tilde.size() << "\n";
    return 0;
}

int run_study(const SimulationSpec& spec, int reps, std::uint64_t seed, int threads,
              const SolverFlags& sf, const SelectFlags& self, const std::string& out) {
    self.validate();
    SelectionConfig cfg;
    cfg.policy = self.policy();
    cfg.restricted = self.restrict_search;
    cfg.backward = !self.forward_only;
    cfg.homoscedastic = sf.homoscedastic;
    cfg.sigma2_beta0 = sf.prior_var_beta;
    cfg.sigma2_alpha0 = sf.prior_var_alpha;
    cfg.shrink = sf.shrink;
    cfg.solver = sf.solver();
    const StudySummary s = replicate_study(spec, reps, cfg, seed, threads);
    if (!out.empty()) write_study_csv(out, s);
    std::cout << "CFR mean " << s.cfr_mean << "% var " << s.cfr_var << "% NZC "
              << s.nzc_mean << "/" << s.nzc_var << " MSE " << s.mse << " PPS " << s.pps
              << " coefMSE " << s.coef_mse << "\n";
    return 0;
}

int run_evaluate(DataFlags df, const std::string& coef_path, const std::string& out) {
    df.policy = "none";  // coefficient files are on the raw predictor scale
    auto [data, scaling] = df.load();

    std::ifstream in(coef_path);
    if (!in) throw DataError("cannot open " + coef_path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string line;
    std::getline(buf, line);  // header: name,mu,sd,model
    VectorXd beta = VectorXd::Zero(data.p()), alpha = VectorXd::Zero(data.q());
    while (std::getline(buf, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string name, mu_s, sd_s, model;
        std::getline(ls, name, ',');
        std::getline(ls, mu_s, ',');
        std::getline(ls, sd_s, ',');
        std::getline(ls, model, ',');
        const auto& names = model == "mean" ? data.mean_names : data.var_names;
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end())
            throw DataError("coefficient \"" + name + "\" has no matching column in the data");
        const int j = static_cast<int>(it - names.begin());
        (model == "mean" ? beta[j] : alpha[j]) = std::stod(mu_s);
    }

    const VectorXd yhat = data.X * beta;
    const double mse_val = mse(yhat, data.y);
    VariationalFit plugin;
    plugin.mu_beta_q = beta;
    plugin.Sigma_beta_q = MatrixXd::Zero(data.p(), data.p());
    plugin.mu_alpha_q = alpha;
    plugin.Sigma_alpha_q = MatrixXd::Zero(data.q(), data.q());
    const double pps_val = pps(plugin, data);
    if (!out.empty()) {
        csv::write_file(out, {"metric", "value"},
                        {{"mse", csv::format_double(mse_val)},
                         {"pps", csv::format_double(pps_val)}});
    }
    std::cout << "mse " << csv::format_double(mse_val) << " pps "
              << csv::format_double(pps_val) << "\n";
    return 0;
}

int run_paths(const std::string& path_csv, const std::string& out) {
    std::ifstream in(path_csv);
    if (!in) throw DataError("cannot open " + path_csv);
    std::string line;
    std::getline(in, line);
    std::stringstream hs(line);
    std::vector<std::string> header;
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
    int step_i = -1, mean_i = -1, var_i = -1;
    for (size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "step") step_i = static_cast<int>(j);
        if (header[j] == "mean_coefficients") mean_i = static_cast<int>(j);
        if (header[j] == "var_coefficients") var_i = static_cast<int>(j);
    }
    if (step_i < 0 || mean_i < 0 || var_i < 0)
        throw DataError("not a selection path file: " + path_csv);

    std::vector<std::vector<std::string>> rows;
    auto expand = [&](const std::string& step, const std::string& model,
                      const std::string& snap) {
        if (snap.empty()) return;
        std::stringstream ss(snap);
        std::string pair;
        while (std::getline(ss, pair, '|')) {
            const auto eq = pair.rfind('=');
            if (eq == std::string::npos) continue;
            rows.push_back({step, model, pair.substr(0, eq), pair.substr(eq + 1)});
        }
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        expand(cells[step_i], "mean", cells[mean_i]);
        expand(cells[step_i], "var", cells[var_i]);
    }
    csv::write_file(out, {"step", "model", "predictor", "coefficient"}, rows);
    std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"variational heteroscedastic regression and greedy model search"};
    app.require_subcommand(1);

    DataFlags fit_df, sel_df, eval_df;
    SolverFlags fit_sf, sel_sf, study_sf;
    SelectFlags sel_self, study_self;

    auto* fit = app.add_subcommand("fit", "fit one model by coordinate ascent");
    fit->set_config("--config", "", "key=value file supplying any flag");
    fit_df.attach(fit);
    fit_sf.attach(fit);
    std::string fit_trace = "fit_trace.csv", fit_coef = "coefficients.csv";
    fit->add_option("--out-trace", fit_trace, "iteration trace CSV");
    fit->add_option("--out-coef", fit_coef, "coefficient CSV");

    auto* sel = app.add_subcommand("select", "greedy forward(-backward) model search");
    sel->set_config("--config", "", "key=value file supplying any flag");
    sel_df.attach(sel);
    sel_sf.attach(sel);
    sel_self.attach(sel);
    sel_sf.shrink = true;
    std::string sel_path = "selection_path.csv", sel_coef = "coefficients.csv",
                sel_summary = "selection_summary.csv";
    sel->add_option("--out-path", sel_path, "selection path CSV");
    sel->add_option("--out-coef", sel_coef, "coefficient CSV");
    sel->add_option("--out-summary", sel_summary, "summary CSV");

    auto* sim = app.add_subcommand("simulate", "draw one synthetic dataset");
    sim->set_config("--config", "", "key=value file supplying any flag");
    std::string sim_beta = "3,1.5,0,0,2,0,0,0", sim_alpha = "0,3,0,0,-3,0,0,0";
    SimulationSpec spec;
    std::uint64_t sim_seed = 1;
    std::string sim_train = "train.csv", sim_valid = "valid.csv";
    bool sim_no_phi = false;
    sim->add_option("--beta", sim_beta, "true mean coefficients, comma separated");
    sim->add_option("--alpha", sim_alpha, "true variance coefficients, comma separated");
    sim->add_option("--sigma", spec.sigma, "baseline noise scale");
    sim->add_option("--intercept", spec.intercept_mean, "true mean intercept");
    sim->add_option("--n-train", spec.n_train, "training sample size");
    sim->add_option("--n-valid", spec.n_valid, "validation sample size");
    sim->add_option("--decay", spec.correlation_decay, "predictor correlation decay");
    sim->add_flag("--no-phi", sim_no_phi, "skip the unit-interval CDF transform");
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--out-train", sim_train, "training CSV");
    sim->add_option("--out-valid", sim_valid, "validation CSV");

    auto* study = app.add_subcommand("study", "replicated simulate/select/evaluate study");
    study->set_config("--config", "", "key=value file supplying any flag");
    std::string study_beta = "3,1.5,0,0,2,0,0,0", study_alpha = "0,3,0,0,-3,0,0,0";
    SimulationSpec study_spec;
    int study_reps = 100, study_threads = 0;
    std::uint64_t study_seed = 1;
    bool study_no_phi = false;
    std::string study_out = "study.csv";
    study->add_option("--beta", study_beta, "true mean coefficients");
    study->add_option("--alpha", study_alpha, "true variance coefficients");
    study->add_option("--sigma", study_spec.sigma, "baseline noise scale");
    study->add_option("--intercept", study_spec.intercept_mean, "true mean intercept");
    study->add_option("--n-train", study_spec.n_train, "training sample size");
    study->add_option("--n-valid", study_spec.n_valid, "validation sample size");
    study->add_option("--decay", study_spec.correlation_decay, "predictor correlation decay");
    study->add_flag("--no-phi", study_no_phi, "skip the unit-interval CDF transform");
    study->add_option("--reps", study_reps, "number of replications");
    study->add_option("--seed", study_seed, "master seed");
    study->add_option("--threads", study_threads,
                      "worker threads (default: HETVAR_THREADS or 1)");
    study->add_option("--out", study_out, "per-replication CSV with summary row");
    study_sf.attach(study);
    study_self.attach(study);
    study_sf.shrink = true;

    auto* eval = app.add_subcommand("evaluate", "MSE and PPS of a coefficient file on a dataset");
    eval->set_config("--config", "", "key=value file supplying any flag");
    eval_df.attach(eval);
    std::string eval_coef;
    std::string eval_out;
    eval->add_option("--coef", eval_coef, "coefficient CSV from fit/select")->required();
    eval->add_option("--out", eval_out, "optional output CSV (default: stdout)");

    auto* paths = app.add_subcommand("paths", "expand a selection path into long format");
    paths->set_config("--config", "", "key=value file supplying any flag");
    std::string paths_in, paths_out = "paths_long.csv";
    paths->add_option("--path", paths_in, "selection path CSV")->required();
    paths->add_option("--out", paths_out, "long-format CSV (step, model, predictor, value)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) return run_fit(fit_df, fit_sf, fit_trace, fit_coef);
        if (*sel) return run_select(sel_df, sel_sf, sel_self, sel_path, sel_coef, sel_summary);
        if (*sim) {
            spec.beta_tilde = parse_vector(sim_beta);
            spec.alpha_tilde = parse_vector(sim_alpha);
            spec.transform_to_unit = !sim_no_phi;
            return run_simulate(spec, sim_seed, sim_train, sim_valid);
        }
        if (*study) {
            study_spec.beta_tilde = parse_vector(study_beta);
            study_spec.alpha_tilde = parse_vector(study_alpha);
            study_spec.transform_to_unit = !study_no_phi;
            if (study_threads <= 0) {
                const char* env = std::getenv("HETVAR_THREADS");
                study_threads = env ? std::max(1, std::atoi(env)) : 1;
            }
            return run_study(study_spec, study_reps, study_seed, study_threads, study_sf,
                             study_self, study_out);
        }
        if (*eval) return run_evaluate(eval_df, eval_coef, eval_out);
        if (*paths) return run_paths(paths_in, paths_out);
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
