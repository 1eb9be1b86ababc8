#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace {

#ifndef HETVAR_CLI_PATH
#define HETVAR_CLI_PATH "tools/hetvar"
#endif

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string out_file = "cli_test_output.tmp";
    const std::string cmd = std::string(HETVAR_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(raw);
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kSniffer = hetvar_tests::repo_file("data/sniffer.csv");

}  // namespace

TEST_CASE("help exits zero and usage errors name the flag") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("select --help").exit_code == 0);

    const RunResult unknown = run_cli("select --data x.csv --response y --bogus");
    CHECK(unknown.exit_code != 0);
    CHECK(unknown.output.find("--bogus") != std::string::npos);

    const RunResult missing = run_cli("select --prior bernoulli --pi-mu 0.2 --data " +
                                      kSniffer + " --response Y");
    CHECK(missing.exit_code != 0);
    CHECK(missing.output.find("--pi-sigma") != std::string::npos);

    const RunResult noverb = run_cli("");
    CHECK(noverb.exit_code != 0);
}

TEST_CASE("select on the bundled sniffer data") {
    const std::string args = "select --data " + kSniffer +
                             " --response Y --policy unit_ss --prior ebic"
                             " --out-path p1.csv --out-coef c1.csv --out-summary s1.csv";
    const RunResult r = run_cli(args);
    CHECK(r.exit_code == 0);
    const std::string path1 = slurp("p1.csv");
    CHECK(path1.find("step,action,predictor") == 0);
    CHECK(slurp("s1.csv").find("elbo") != std::string::npos);

    SUBCASE("reruns are byte-identical") {
        const RunResult again = run_cli("select --data " + kSniffer +
                                        " --response Y --policy unit_ss --prior ebic"
                                        " --out-path p2.csv --out-coef c2.csv --out-summary s2.csv");
        CHECK(again.exit_code == 0);
        CHECK(slurp("p2.csv") == path1);
        CHECK(slurp("c2.csv") == slurp("c1.csv"));
    }
    SUBCASE("paths verb expands the snapshots") {
        const RunResult p = run_cli("paths --path p1.csv --out long1.csv");
        CHECK(p.exit_code == 0);
        const std::string lng = slurp("long1.csv");
        CHECK(lng.find("step,model,predictor,coefficient") == 0);
        CHECK(lng.find("mean") != std::string::npos);
    }
}

TEST_CASE("fit writes a trace and coefficients and flags data errors") {
    SUBCASE("clean fit") {
        const RunResult r = run_cli("fit --data " + kSniffer +
                                    " --response Y --out-trace t1.csv --out-coef fc1.csv");
        CHECK(r.exit_code == 0);
        CHECK(slurp("t1.csv").find("iteration,elbo,alpha_accepted") == 0);
        CHECK(slurp("fc1.csv").find("name,mu,sd,model") == 0);
        CHECK(r.output.find("converged yes") != std::string::npos);
    }
    SUBCASE("NaN cell exits 1 and names the column") {
        std::ofstream bad("bad_cell.csv");
        bad << "y,a\n1,2\n3,nan\n";
        bad.close();
        const RunResult r = run_cli("fit --data bad_cell.csv --response y");
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("\"a\"") != std::string::npos);
    }
    SUBCASE("missing file exits 1") {
        CHECK(run_cli("fit --data does_not_exist.csv --response y").exit_code == 1);
    }
}

TEST_CASE("simulate, study and evaluate round trip") {
    const RunResult sim = run_cli(
        "simulate --seed 5 --n-train 80 --n-valid 40 --out-train tr.csv --out-valid va.csv");
    CHECK(sim.exit_code == 0);
    const std::string train = slurp("tr.csv");
    CHECK(train.find("y,x1") == 0);

    const RunResult fit = run_cli(
        "fit --data tr.csv --response y --out-trace t2.csv --out-coef fc2.csv");
    CHECK(fit.exit_code == 0);

    const RunResult eval = run_cli("evaluate --data va.csv --response y --coef fc2.csv");
    CHECK(eval.exit_code == 0);
    CHECK(eval.output.find("mse") != std::string::npos);
    CHECK(eval.output.find("pps") != std::string::npos);

    const RunResult study = run_cli(
        "study --reps 3 --seed 2 --n-train 60 --n-valid 60 --restrict --out st.csv");
    CHECK(study.exit_code == 0);
    const std::string st = slurp("st.csv");
    CHECK(st.find("seed,failed,correct_mean") == 0);
    CHECK(st.find("summary") != std::string::npos);

    SUBCASE("config file supplies flags, command line overrides") {
        std::ofstream cfg("study.cfg");
        cfg << "reps=2\nseed=2\nn-train=60\nn-valid=60\nrestrict=true\nout=st2.csv\n";
        cfg.close();
        const RunResult r = run_cli("study --config study.cfg --reps 3 --out st3.csv");
        CHECK(r.exit_code == 0);
        CHECK(slurp("st3.csv") == st);  // overrides reproduce the direct run
    }
}
