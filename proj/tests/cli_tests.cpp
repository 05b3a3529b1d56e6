// End-to-end runs of the ion-calib binary in a scratch directory: the toy
// pipeline must finish quickly, exit codes and messages must match the
// documented contract, and reruns must be bit-identical.
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

#define CHECK_MSG(cond, msg)                                                     \
    do {                                                                         \
        if (!(cond)) {                                                           \
            std::fprintf(stderr, "FAIL %s:%d: %s\n", __FILE__, __LINE__, (msg)); \
            ++failures;                                                          \
        }                                                                        \
    } while (0)

std::string repo(const std::string& rel) { return std::string(IONCALIB_REPO_DIR) + "/" + rel; }

struct RunResult {
    int exit_code = -1;
    std::string stderr_text;
};

RunResult run_cli(const std::string& args, const std::string& stderr_file) {
    const std::string cmd = std::string(IONCALIB_CLI_PATH) + " " + args + " 2>" + stderr_file;
    const int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream in(stderr_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.stderr_text = ss.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    const fs::path ws = fs::temp_directory_path() /
                        ("ioncalib_cli_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(ws);
    const std::string err_file = (ws / "stderr.txt").string();

    const auto t0 = std::chrono::steady_clock::now();

    // generate
    {
        const RunResult r = run_cli("generate --model " + repo("models/model-2state.json") + " --params " +
                                        repo("models/model-2state-params.json") + " --protocol " +
                                        repo("protocols/toy-steps.csv") + " --sigma 8 --dt 1 --seed 11 --out " +
                                        (ws / "data").string(),
                                    err_file);
        CHECK_MSG(r.exit_code == 0, "generate exits 0");
        CHECK_MSG(fs::exists(ws / "data" / "trace.csv"), "trace written");
        CHECK_MSG(fs::exists(ws / "data" / "manifest.json"), "manifest written");
    }

    // rerun is bit-identical
    {
        const std::string before = slurp((ws / "data" / "trace.csv").string());
        run_cli("generate --model " + repo("models/model-2state.json") + " --params " +
                    repo("models/model-2state-params.json") + " --protocol " + repo("protocols/toy-steps.csv") +
                    " --sigma 8 --dt 1 --seed 11 --out " + (ws / "data").string(),
                err_file);
        CHECK_MSG(slurp((ws / "data" / "trace.csv").string()) == before, "rerun bit-identical");
    }

    // missing protocol: exit 2 with the documented message
    {
        const RunResult r = run_cli("generate --model " + repo("models/model-2state.json") + " --params " +
                                        repo("models/model-2state-params.json") +
                                        " --protocol /missing/protocol.csv --out " + (ws / "x").string(),
                                    err_file);
        CHECK_MSG(r.exit_code == 2, "missing protocol exits 2");
        CHECK_MSG(r.stderr_text.find("protocol not found: /missing/protocol.csv") != std::string::npos,
                  "missing protocol message");
    }

    // inputs are never mutated
    const std::string data_before = slurp((ws / "data" / "trace.csv").string());

    // sample with 3 chains writes an rhat report; then predict and evaluate
    {
        const RunResult r = run_cli(
            "sample --model " + repo("models/model-2state.json") + " --params " +
                repo("models/model-2state-params.json") + " --protocol " + repo("protocols/toy-steps.csv") +
                " --data " + (ws / "data" / "trace.csv").string() +
                " --discrepancy iid --budget 1000 --chains 3 --iterations 500 --jobs 2 --seed 7 --out " +
                (ws / "run-iid").string(),
            err_file);
        CHECK_MSG(r.exit_code == 0, "sample exits 0");
        CHECK_MSG(slurp((ws / "data" / "trace.csv").string()) == data_before, "sample does not mutate inputs");
        const std::string chain0 = slurp((ws / "run-iid" / "chain_0.csv").string());
        run_cli(
            "sample --model " + repo("models/model-2state.json") + " --params " +
                repo("models/model-2state-params.json") + " --protocol " + repo("protocols/toy-steps.csv") +
                " --data " + (ws / "data" / "trace.csv").string() +
                " --discrepancy iid --budget 1000 --chains 3 --iterations 500 --jobs 2 --seed 7 --out " +
                (ws / "run-iid").string(),
            err_file);
        CHECK_MSG(slurp((ws / "run-iid" / "chain_0.csv").string()) == chain0,
                  "sample rerun is bit-identical");
        CHECK_MSG(fs::exists(ws / "run-iid" / "rhat.csv"), "rhat report over chains");
        const std::string rhat_text = slurp((ws / "run-iid" / "rhat.csv").string());
        CHECK_MSG(rhat_text.find("parameter,rhat") == 0, "rhat header");
        CHECK_MSG(rhat_text.find("g,") != std::string::npos, "per-parameter rhat rows");

        const RunResult arma = run_cli(
            "sample --model " + repo("models/model-2state.json") + " --params " +
                repo("models/model-2state-params.json") + " --protocol " + repo("protocols/toy-steps.csv") +
                " --data " + (ws / "data" / "trace.csv").string() +
                " --discrepancy arma --budget 1000 --chains 2 --iterations 400 --jobs 2 --seed 8 --out " +
                (ws / "run-arma").string(),
            err_file);
        CHECK_MSG(arma.exit_code == 0, "arma sample exits 0");

        const RunResult pred = run_cli("predict --run " + (ws / "run-iid").string() + " --protocol " +
                                           repo("protocols/toy-steps.csv") + " --draws 30 --dt 1 --seed 2 --out " +
                                           (ws / "pred").string(),
                                       err_file);
        CHECK_MSG(pred.exit_code == 0, "predict exits 0");
        const std::string pred_csv = slurp((ws / "pred" / "predictive.csv").string());
        CHECK_MSG(pred_csv.rfind("time_ms,voltage_mV,mean_pA,var_pA2,lo95_pA,hi95_pA", 0) == 0,
                  "predictive header");

        const RunResult eval = run_cli(
            "evaluate --run " + (ws / "run-iid").string() + " --run " + (ws / "run-arma").string() +
                " --dataset calibration=" + (ws / "data" / "trace.csv").string() + "=" +
                repo("protocols/toy-steps.csv") + " --draws 20 --seed 3 --out " + (ws / "eval").string(),
            err_file);
        CHECK_MSG(eval.exit_code == 0, "evaluate exits 0");
        const std::string rel = slurp((ws / "eval" / "loglik_relative.csv").string());
        CHECK_MSG(rel.find("iid") != std::string::npos && rel.find("arma") != std::string::npos,
                  "variant columns present");
    }

    // explicit initial occupancy is accepted and changes the trace
    {
        const RunResult r = run_cli("generate --model " + repo("models/model-2state.json") + " --params " +
                                        repo("models/model-2state-params.json") + " --protocol " +
                                        repo("protocols/toy-steps.csv") +
                                        " --sigma 0 --dt 1 --seed 11 --x0 1 0 --out " + (ws / "x0").string(),
                                    err_file);
        CHECK_MSG(r.exit_code == 0, "generate with --x0 exits 0");
        const RunResult bad = run_cli("generate --model " + repo("models/model-2state.json") + " --params " +
                                          repo("models/model-2state-params.json") + " --protocol " +
                                          repo("protocols/toy-steps.csv") +
                                          " --sigma 0 --dt 1 --x0 1 0 0 --out " + (ws / "x0bad").string(),
                                      err_file);
        CHECK_MSG(bad.exit_code == 3, "wrong x0 length is a contract error");
    }

    // --help exists for the top level and subcommands
    {
        const RunResult r = run_cli("--help >/dev/null", err_file);
        CHECK_MSG(r.exit_code == 0, "--help exits 0");
    }

    const auto elapsed =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0).count();
    CHECK_MSG(elapsed < 10, "toy pipeline stays under 10 seconds");

    std::error_code ec;
    fs::remove_all(ws, ec);
    if (failures == 0) std::printf("cli_tests: all checks passed (%llds)\n", static_cast<long long>(elapsed));
    return failures == 0 ? 0 : 1;
}
