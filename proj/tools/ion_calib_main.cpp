// ion-calib command line: flag parsing and dispatch only; all work happens
// behind the ioncalib C API. Configuration precedence is flags > config file
// > built-in defaults, and the effective config is recorded in each output
// manifest by the library.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ioncalib/ioncalib.h"
#include "json.hpp"

namespace {

using nlohmann::json;

int exit_code_for(ioncalib_status status) {
    switch (status) {
        case IONCALIB_OK: return 0;
        case IONCALIB_ERR_IO:
        case IONCALIB_ERR_PARSE:
        case IONCALIB_ERR_VALIDATION: return 2;
        default: return 3;
    }
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "config not found: %s\n", path.c_str());
        std::exit(2);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        std::fprintf(stderr, "config %s: %s\n", path.c_str(), e.what());
        std::exit(2);
    }
}

// flags win over config-file entries
void merge_flag(json& config, const std::string& key, const json& value) { config[key] = value; }

struct CommonState {
    std::string config_path;
    json config = json::object();
    bool print_manifest = false;
};

int dispatch(ioncalib_status (*fn)(const char*, char**), const json& config, bool print_manifest) {
    char* manifest = nullptr;
    const ioncalib_status status = fn(config.dump().c_str(), &manifest);
    if (status != IONCALIB_OK) {
        std::fprintf(stderr, "%s\n", ioncalib_last_error());
        return exit_code_for(status);
    }
    if (print_manifest && manifest) std::fprintf(stdout, "%s\n", manifest);
    ioncalib_string_free(manifest);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ion-calib: Markov ion-channel calibration under iid/GP/ARMA error models"};
    app.require_subcommand(1);

    // shared option storage; each subcommand assembles its own config
    std::string config_path, model, params, protocol, data, out, discrepancy = "iid", kernel = "rbf";
    std::string init, run_dir;
    std::vector<std::string> runs, dataset_specs;
    double sigma = 25.0, dt = 0.0;
    std::int64_t seed = -1;
    int chains = 3, jobs = 1, draws = 200, budget = 20000;
    std::uint64_t iterations = 100000, burn_in = 0, heartbeat = 0;
    std::vector<int> inducing;
    std::vector<double> x0;
    bool gp_dense = false, print_manifest = false;
    int arma_p = 2, arma_q = 2;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags take precedence)");
        cmd->add_option("--seed", seed, "random seed (fallback: ION_CALIB_SEED, then 1)");
        cmd->add_option("--out", out, "output directory")->required();
        cmd->add_flag("--print-manifest", print_manifest, "print the manifest to stdout");
    };

    CLI::App* generate = app.add_subcommand("generate", "simulate a trace and add iid Gaussian noise");
    generate->add_option("--model", model, "model definition JSON")->required();
    generate->add_option("--params", params, "parameter JSON")->required();
    generate->add_option("--protocol", protocol, "protocol CSV")->required();
    generate->add_option("--sigma", sigma, "noise sd in pA (default 25)");
    generate->add_option("--dt", dt, "output grid spacing in ms");
    generate->add_option("--x0", x0,
                         "initial state occupancies (default: steady state at the holding potential)");
    add_common(generate);

    auto add_fit_like = [&](CLI::App* cmd) {
        cmd->add_option("--model", model)->required();
        cmd->add_option("--params", params)->required();
        cmd->add_option("--protocol", protocol)->required();
        cmd->add_option("--data", data, "calibration trace CSV")->required();
        cmd->add_option("--discrepancy", discrepancy, "iid | gp-t | gp-ov | arma");
        cmd->add_option("--kernel", kernel, "rbf | ou | matern32");
        cmd->add_option("--inducing", inducing, "inducing grid counts (P or P1 P2)");
        cmd->add_flag("--gp-dense", gp_dense, "dense GP path instead of FITC (small N)");
        cmd->add_option("--arma-p", arma_p);
        cmd->add_option("--arma-q", arma_q);
        add_common(cmd);
    };

    CLI::App* fit = app.add_subcommand("fit", "MAP estimation with CMA-ES");
    add_fit_like(fit);
    fit->add_option("--budget", budget, "max objective evaluations");

    CLI::App* sample = app.add_subcommand("sample", "adaptive-covariance MCMC");
    add_fit_like(sample);
    sample->add_option("--budget", budget, "MAP pre-pass evaluation budget");
    sample->add_option("--init", init, "map.json from a previous fit");
    sample->add_option("--chains", chains);
    sample->add_option("--iterations", iterations);
    sample->add_option("--burn-in", burn_in, "default: half the iterations");
    sample->add_option("--jobs", jobs, "parallel chains");
    sample->add_option("--heartbeat", heartbeat, "progress to stderr every k iterations");

    CLI::App* predict = app.add_subcommand("predict", "posterior predictive on a protocol");
    predict->add_option("--run", run_dir, "sample output directory")->required();
    predict->add_option("--protocol", protocol, "target protocol CSV")->required();
    predict->add_option("--draws", draws, "posterior draws (default 200)");
    predict->add_option("--dt", dt, "output grid spacing in ms");
    add_common(predict);

    CLI::App* evaluate = app.add_subcommand("evaluate", "score variants on datasets (RMSE, predictive loglik)");
    evaluate->add_option("--run", runs, "sample output directory (repeatable)")->required();
    evaluate
        ->add_option("--dataset", dataset_specs,
                     "label=trace.csv=protocol.csv (repeatable)")
        ->required();
    evaluate->add_option("--draws", draws);
    add_common(evaluate);

    CLI11_PARSE(app, argc, argv);

    json config = config_path.empty() ? json::object() : load_config_file(config_path);

    auto set_if = [&](CLI::App* cmd, const char* flag, const std::string& key, const json& value) {
        if (cmd->count(flag) > 0) merge_flag(config, key, value);
    };

    CLI::App* active = app.get_subcommands().front();
    merge_flag(config, "out", out);
    if (seed >= 0) merge_flag(config, "seed", static_cast<std::uint64_t>(seed));

    if (active == generate) {
        merge_flag(config, "model", model);
        merge_flag(config, "params", params);
        merge_flag(config, "protocol", protocol);
        set_if(generate, "--sigma", "sigma", sigma);
        set_if(generate, "--dt", "dt", dt);
        set_if(generate, "--x0", "x0", x0);
        return dispatch(&ioncalib_run_generate, config, print_manifest);
    }

    if (active == fit || active == sample) {
        merge_flag(config, "model", model);
        merge_flag(config, "params", params);
        merge_flag(config, "protocol", protocol);
        merge_flag(config, "data", data);
        set_if(active, "--discrepancy", "discrepancy", discrepancy);
        set_if(active, "--kernel", "kernel", kernel);
        set_if(active, "--inducing", "inducing", inducing);
        set_if(active, "--gp-dense", "gp_dense", gp_dense);
        set_if(active, "--arma-p", "arma_p", arma_p);
        set_if(active, "--arma-q", "arma_q", arma_q);
        set_if(active, "--budget", "budget", budget);
        if (active == fit) return dispatch(&ioncalib_run_fit, config, print_manifest);
        set_if(sample, "--init", "init", init);
        set_if(sample, "--chains", "chains", chains);
        set_if(sample, "--iterations", "iterations", iterations);
        set_if(sample, "--burn-in", "burn_in", burn_in);
        set_if(sample, "--jobs", "jobs", jobs);
        set_if(sample, "--heartbeat", "heartbeat", heartbeat);
        return dispatch(&ioncalib_run_sample, config, print_manifest);
    }

    if (active == predict) {
        merge_flag(config, "run", run_dir);
        merge_flag(config, "protocol", protocol);
        set_if(predict, "--draws", "draws", draws);
        set_if(predict, "--dt", "dt", dt);
        return dispatch(&ioncalib_run_predict, config, print_manifest);
    }

    // evaluate: parse label=trace=protocol triples
    merge_flag(config, "runs", runs);
    json datasets = json::array();
    for (const auto& spec : dataset_specs) {
        const auto first = spec.find('=');
        const auto second = spec.find('=', first == std::string::npos ? first : first + 1);
        if (first == std::string::npos || second == std::string::npos) {
            std::fprintf(stderr, "bad --dataset '%s': expected label=trace.csv=protocol.csv\n", spec.c_str());
            return 2;
        }
        datasets.push_back({{"label", spec.substr(0, first)},
                            {"data", spec.substr(first + 1, second - first - 1)},
                            {"protocol", spec.substr(second + 1)}});
    }
    merge_flag(config, "datasets", datasets);
    set_if(evaluate, "--draws", "draws", draws);
    return dispatch(&ioncalib_run_evaluate, config, print_manifest);
}
