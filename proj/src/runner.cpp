#include "runner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cmaes.hpp"
#include "datagen.hpp"
#include "errors.hpp"
#include "ioutil.hpp"
#include "mcmc.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "posterior.hpp"
#include "predict.hpp"
#include "priors.hpp"
#include "protocol.hpp"
#include "simulate.hpp"
#include "trace.hpp"

namespace ioncalib {

namespace fs = std::filesystem;
using nlohmann::json;

const char* tool_version() { return "0.1.0"; }

namespace {

std::uint64_t resolve_seed(const json& config) {
    if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
    if (const char* env = std::getenv("ION_CALIB_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return v;
        throw ParseError(std::string("ION_CALIB_SEED is not an integer: ") + env);
    }
    return 1;
}

std::string require_string(const json& config, const char* field) {
    if (!config.contains(field))
        throw ParseError(std::string("config: missing field '") + field + "'");
    return config.at(field).get<std::string>();
}

fs::path prepare_out_dir(const json& config) {
    const fs::path out = require_string(config, "out");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory: " + out.string());
    return out;
}

// effective config + input hashes; keep manifests timestamp-free so reruns
// are bit-identical
json make_manifest(const std::string& command, const json& effective_config,
                   const std::vector<std::string>& input_paths, const std::vector<std::string>& outputs) {
    json manifest;
    manifest["tool"] = "ion-calib";
    manifest["version"] = tool_version();
    manifest["command"] = command;
    manifest["config"] = effective_config;
    manifest["config_hash"] = fnv1a_hex(effective_config.dump());
    json inputs = json::object();
    for (const auto& p : input_paths) inputs[p] = file_hash(p);
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    return manifest;
}

struct LoadedProblem {
    ModelSpec spec;
    ParameterVector params;
    VoltageProtocol protocol;
};

LoadedProblem load_problem(const json& config) {
    LoadedProblem p;
    const std::string model_path = require_string(config, "model");
    const std::string params_path = require_string(config, "params");
    const std::string protocol_path = require_string(config, "protocol");
    if (!fs::exists(model_path)) throw IoError("model not found: " + model_path);
    if (!fs::exists(params_path)) throw IoError("parameters not found: " + params_path);
    if (!fs::exists(protocol_path)) throw IoError("protocol not found: " + protocol_path);
    p.spec = load_model_spec(model_path);
    p.params = load_parameters(params_path, p.spec);
    p.protocol = load_protocol(protocol_path);
    return p;
}

std::vector<double> grid_for(const VoltageProtocol& protocol, const json& config) {
    double dt = 0.1;
    if (protocol.kind() == VoltageProtocol::Kind::Sampled) dt = protocol.sample_dt_ms();
    if (config.contains("dt")) dt = config.at("dt").get<double>();
    return make_time_grid(protocol.total_duration_ms(), dt);
}

DiscrepancyModel discrepancy_from_config(const json& config) {
    DiscrepancyModel d;
    d.kind = discrepancy_from_name(config.value("discrepancy", std::string("iid")));
    d.kernel = kernel_family_from_name(config.value("kernel", std::string("rbf")));
    if (config.contains("inducing")) d.inducing_counts = config.at("inducing").get<std::vector<int>>();
    d.gp_dense = config.value("gp_dense", false);
    d.arma_p = config.value("arma_p", 2);
    d.arma_q = config.value("arma_q", 2);
    if (config.contains("arma_phi_center"))
        d.arma_phi_center = config.at("arma_phi_center").get<std::vector<double>>();
    if (config.contains("arma_zeta_center"))
        d.arma_zeta_center = config.at("arma_zeta_center").get<std::vector<double>>();
    return d;
}

PriorConfig prior_config_from(const json& config) {
    PriorConfig pc;
    if (!config.contains("priors")) return pc;
    const json& p = config.at("priors");
    pc.box_lo_factor = p.value("box_lo_factor", pc.box_lo_factor);
    pc.box_hi_factor = p.value("box_hi_factor", pc.box_hi_factor);
    pc.sigma_halfnormal_scale = p.value("sigma_halfnormal_scale", pc.sigma_halfnormal_scale);
    pc.gp_invgamma_shape = p.value("gp_invgamma_shape", pc.gp_invgamma_shape);
    pc.gp_invgamma_scale = p.value("gp_invgamma_scale", pc.gp_invgamma_scale);
    pc.arma_normal_sd = p.value("arma_normal_sd", pc.arma_normal_sd);
    return pc;
}

json priors_to_json(const PriorSpec& priors) {
    json out = json::array();
    for (std::size_t i = 0; i < priors.size(); ++i) {
        json entry;
        entry["name"] = priors.names[i];
        entry["transform"] = priors.transforms[i] == Transform::Log ? "log" : "identity";
        std::visit(
            [&entry](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, UniformPrior>) {
                    entry["dist"] = "uniform";
                    entry["lo"] = d.lo;
                    entry["hi"] = d.hi;
                } else if constexpr (std::is_same_v<T, HalfNormalPrior>) {
                    entry["dist"] = "half_normal";
                    entry["scale"] = d.scale;
                } else if constexpr (std::is_same_v<T, InverseGammaPrior>) {
                    entry["dist"] = "inverse_gamma";
                    entry["shape"] = d.shape;
                    entry["scale"] = d.scale;
                } else {
                    entry["dist"] = "normal";
                    entry["center"] = d.center;
                    entry["scale"] = d.scale;
                }
            },
            priors.dists[i]);
        out.push_back(entry);
    }
    return out;
}

PriorSpec priors_from_json(const json& doc) {
    PriorSpec priors;
    for (const auto& entry : doc) {
        priors.names.push_back(entry.at("name").get<std::string>());
        priors.transforms.push_back(entry.at("transform").get<std::string>() == "log" ? Transform::Log
                                                                                      : Transform::Identity);
        const std::string dist = entry.at("dist").get<std::string>();
        if (dist == "uniform")
            priors.dists.push_back(UniformPrior{entry.at("lo").get<double>(), entry.at("hi").get<double>()});
        else if (dist == "half_normal")
            priors.dists.push_back(HalfNormalPrior{entry.at("scale").get<double>()});
        else if (dist == "inverse_gamma")
            priors.dists.push_back(
                InverseGammaPrior{entry.at("shape").get<double>(), entry.at("scale").get<double>()});
        else if (dist == "normal")
            priors.dists.push_back(NormalPrior{entry.at("center").get<double>(), entry.at("scale").get<double>()});
        else
            throw ParseError("snapshot priors: unknown dist '" + dist + "'");
    }
    priors.validate();
    return priors;
}

Eigen::VectorXd json_to_vector(const json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    Eigen::Index i = 0;
    for (const auto& x : arr) v(i++) = x.get<double>();
    return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

// Shared fit machinery: ARMA pre-pass (theta under iid, then coefficient MLE)
// followed by a CMA-ES maximization of the full posterior in sampling space.
struct FitOutcome {
    DiscrepancyModel discrepancy;  // with ARMA centers resolved
    PriorSpec priors;
    Eigen::VectorXd map_natural;
    double map_value = 0.0;
    int evaluations = 0;
};

FitOutcome fit_map(const LoadedProblem& problem, const Trace& data, const json& config, std::uint64_t seed) {
    DiscrepancyModel discrepancy = discrepancy_from_config(config);
    const PriorConfig prior_config = prior_config_from(config);
    const int budget = config.value("budget", 20000);

    if (discrepancy.kind == DiscrepancyKind::Arma &&
        (discrepancy.arma_phi_center.empty() || discrepancy.arma_zeta_center.empty())) {
        // prior centering pre-pass: fit theta under iid, take residuals, fit
        // the ARMA coefficient MLE on them
        DiscrepancyModel iid;
        iid.kind = DiscrepancyKind::Iid;
        PriorSpec iid_priors = default_priors(problem.spec, problem.params, iid, prior_config);
        PosteriorEvaluator iid_eval(problem.spec, problem.params, problem.protocol, data, iid, iid_priors);
        auto [lower, upper] = iid_priors.sampling_bounds();
        Eigen::VectorXd init = 0.5 * (lower + upper);
        CmaesOptions opts;
        opts.max_evaluations = budget;
        const CmaesResult iid_map = cmaes_maximize(
            [&](const Eigen::VectorXd& s) { return iid_eval.log_posterior_sampling(s); }, lower, upper, init,
            seed + 101, opts);
        const Eigen::VectorXd natural = iid_priors.to_natural(iid_map.best_point);
        const Eigen::VectorXd residual = iid_eval.residual_at(iid_eval.decode(natural).params);
        auto [phi, zeta] = arma_coefficient_mle(residual, discrepancy.arma_p, discrepancy.arma_q, seed + 202);
        discrepancy.arma_phi_center = phi;
        discrepancy.arma_zeta_center = zeta;
    }

    FitOutcome out;
    out.discrepancy = discrepancy;
    out.priors = config.contains("priors_resolved") ? priors_from_json(config.at("priors_resolved"))
                                                    : default_priors(problem.spec, problem.params, discrepancy,
                                                                     prior_config);
    PosteriorEvaluator eval(problem.spec, problem.params, problem.protocol, data, discrepancy, out.priors);

    auto [lower, upper] = out.priors.sampling_bounds();
    Eigen::VectorXd init = 0.5 * (lower + upper);
    if (config.contains("init_point")) init = out.priors.to_sampling(json_to_vector(config.at("init_point")));
    CmaesOptions opts;
    opts.max_evaluations = config.value("budget", 20000);
    const CmaesResult res = cmaes_maximize(
        [&](const Eigen::VectorXd& s) { return eval.log_posterior_sampling(s); }, lower, upper, init, seed,
        opts);
    out.map_natural = out.priors.to_natural(res.best_point);
    out.map_value = res.best_value;
    out.evaluations = res.evaluations;
    return out;
}

void write_samples_csv(const PosteriorSamples& samples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write samples: " + path);
    for (std::size_t i = 0; i < samples.parameter_names.size(); ++i) out << samples.parameter_names[i] << ",";
    out << "log_posterior\n";
    char buf[48];
    for (Eigen::Index r = 0; r < samples.draws.rows(); ++r) {
        for (Eigen::Index c = 0; c < samples.draws.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g,", samples.draws(r, c));
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g\n", samples.log_posterior(r));
        out << buf;
    }
}

PosteriorSamples read_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("samples not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty samples file");
    std::vector<std::string> names;
    {
        std::stringstream header(line);
        std::string field;
        while (std::getline(header, field, ',')) names.push_back(field);
    }
    if (names.empty() || names.back() != "log_posterior")
        throw ParseError(path + ": last column must be log_posterior");
    names.pop_back();

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<double> row;
        while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
        if (row.size() != names.size() + 1) throw ParseError(path + ": ragged row");
        rows.push_back(std::move(row));
    }
    PosteriorSamples s;
    s.parameter_names = names;
    s.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    s.log_posterior.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < names.size(); ++c)
            s.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        s.log_posterior(static_cast<Eigen::Index>(r)) = rows[r].back();
    }
    return s;
}

// evenly strided subset of row indices across all chains' retained draws
std::vector<std::pair<int, Eigen::Index>> select_draws(const std::vector<PosteriorSamples>& chains,
                                                       int requested) {
    std::vector<std::pair<int, Eigen::Index>> all;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (Eigen::Index r = 0; r < chains[c].draws.rows(); ++r)
            all.emplace_back(static_cast<int>(c), r);
    if (all.empty()) throw ContractError("no retained draws available");
    if (requested <= 0 || static_cast<std::size_t>(requested) >= all.size()) return all;
    std::vector<std::pair<int, Eigen::Index>> picked;
    const double stride = static_cast<double>(all.size()) / requested;
    for (int i = 0; i < requested; ++i)
        picked.push_back(all[static_cast<std::size_t>(i * stride)]);
    return picked;
}

}  // namespace

json run_generate(const json& config) {
    const std::uint64_t seed = resolve_seed(config);
    const LoadedProblem problem = load_problem(config);
    const double sigma = config.value("sigma", 25.0);
    const fs::path out_dir = prepare_out_dir(config);

    const std::vector<double> grid = grid_for(problem.protocol, config);
    Eigen::VectorXd x0;  // empty -> steady state at the holding potential
    if (config.contains("x0")) {
        const auto values = config.at("x0").get<std::vector<double>>();
        if (static_cast<int>(values.size()) != problem.spec.n_states())
            throw ContractError("x0 must list one occupancy per model state");
        x0 = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
    const Trace trace =
        generate_synthetic_trace(problem.spec, problem.params, problem.protocol, grid, sigma, seed, x0);

    const std::string trace_path = (out_dir / "trace.csv").string();
    save_trace(trace, trace_path);

    json effective = config;
    effective["seed"] = seed;
    effective["sigma"] = sigma;
    json manifest = make_manifest("generate", effective,
                                  {config.at("model"), config.at("params"), config.at("protocol")},
                                  {"trace.csv"});
    manifest["points"] = trace.size();
    save_json(manifest, (out_dir / "manifest.json").string());
    return manifest;
}

json run_fit(const json& config) {
    const std::uint64_t seed = resolve_seed(config);
    const LoadedProblem problem = load_problem(config);
    const std::string data_path = require_string(config, "data");
    const Trace data = load_trace(data_path);
    const fs::path out_dir = prepare_out_dir(config);

    const FitOutcome fit = fit_map(problem, data, config, seed);

    json map_doc;
    map_doc["variant"] = discrepancy_name(fit.discrepancy.kind);
    map_doc["kernel"] = kernel_family_name(fit.discrepancy.kernel);
    map_doc["names"] = fit.priors.names;
    map_doc["point"] = vector_to_json(fit.map_natural);
    map_doc["value"] = fit.map_value;
    map_doc["evaluations"] = fit.evaluations;
    map_doc["seed"] = seed;
    if (fit.discrepancy.kind == DiscrepancyKind::Arma) {
        map_doc["arma_phi_center"] = fit.discrepancy.arma_phi_center;
        map_doc["arma_zeta_center"] = fit.discrepancy.arma_zeta_center;
    }
    save_json(map_doc, (out_dir / "map.json").string());

    json effective = config;
    effective["seed"] = seed;
    json manifest = make_manifest(
        "fit", effective, {config.at("model"), config.at("params"), config.at("protocol"), data_path},
        {"map.json"});
    manifest["map_value"] = fit.map_value;
    save_json(manifest, (out_dir / "manifest.json").string());
    return manifest;
}

json run_sample(const json& config) {
    const std::uint64_t seed = resolve_seed(config);
    const LoadedProblem problem = load_problem(config);
    const std::string data_path = require_string(config, "data");
    const Trace data = load_trace(data_path);
    const fs::path out_dir = prepare_out_dir(config);

    json fit_config = config;
    Eigen::VectorXd init_natural;
    DiscrepancyModel discrepancy = discrepancy_from_config(config);
    PriorSpec priors;
    double map_value = 0.0;

    if (config.contains("init")) {
        const json map_doc = load_json(config.at("init").get<std::string>(), "fit snapshot");
        init_natural = json_to_vector(map_doc.at("point"));
        map_value = map_doc.value("value", 0.0);
        if (map_doc.contains("arma_phi_center")) {
            discrepancy.arma_phi_center = map_doc.at("arma_phi_center").get<std::vector<double>>();
            discrepancy.arma_zeta_center = map_doc.at("arma_zeta_center").get<std::vector<double>>();
        }
        priors = default_priors(problem.spec, problem.params, discrepancy, prior_config_from(config));
    } else {
        const FitOutcome fit = fit_map(problem, data, fit_config, seed);
        discrepancy = fit.discrepancy;
        priors = fit.priors;
        init_natural = fit.map_natural;
        map_value = fit.map_value;
    }

    PosteriorEvaluator eval(problem.spec, problem.params, problem.protocol, data, discrepancy, priors);

    const int chains = config.value("chains", 3);
    McmcOptions opts;
    opts.iterations = config.value("iterations", 100000);
    opts.burn_in = config.value("burn_in", 0);
    opts.warm_up = config.value("warm_up", 200);
    opts.max_retained = config.value("max_retained", 10000);
    // long runs report progress roughly ten times by default; 0 disables
    opts.heartbeat = config.contains("heartbeat") ? config.at("heartbeat").get<std::size_t>()
                                                  : std::max<std::size_t>(5000, opts.iterations / 10);
    opts.heartbeat_label = "sample";
    const int jobs = std::max(1, config.value("jobs", 1));

    const Eigen::VectorXd init_sampling = priors.to_sampling(init_natural);
    std::vector<PosteriorSamples> chain_results(static_cast<std::size_t>(chains));
    std::vector<std::exception_ptr> chain_errors(static_cast<std::size_t>(chains));

    auto run_chain = [&](int c) {
        try {
            PosteriorSamples s = mcmc_sample(
                [&eval](const Eigen::VectorXd& p) { return eval.log_posterior_sampling(p); }, init_sampling,
                seed + 7919ull * static_cast<std::uint64_t>(c + 1), opts, c);
            // store draws on the natural scale
            for (Eigen::Index r = 0; r < s.draws.rows(); ++r)
                s.draws.row(r) = priors.to_natural(s.draws.row(r).transpose()).transpose();
            s.parameter_names = priors.names;
            chain_results[static_cast<std::size_t>(c)] = std::move(s);
        } catch (...) {
            chain_errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
    };

    for (int start = 0; start < chains; start += jobs) {
        std::vector<std::thread> pool;
        for (int c = start; c < std::min(chains, start + jobs); ++c) pool.emplace_back(run_chain, c);
        for (auto& t : pool) t.join();
    }
    for (const auto& err : chain_errors)
        if (err) std::rethrow_exception(err);

    std::vector<std::string> outputs;
    for (int c = 0; c < chains; ++c) {
        const std::string name = "chain_" + std::to_string(c) + ".csv";
        write_samples_csv(chain_results[static_cast<std::size_t>(c)], (out_dir / name).string());
        outputs.push_back(name);
    }

    if (chains >= 2) {
        // common retained length so split-Rhat applies
        Eigen::Index min_rows = chain_results.front().draws.rows();
        for (const auto& c : chain_results) min_rows = std::min(min_rows, c.draws.rows());
        std::vector<PosteriorSamples> trimmed = chain_results;
        for (auto& c : trimmed) {
            c.draws.conservativeResize(min_rows, Eigen::NoChange);
            c.log_posterior.conservativeResize(min_rows);
        }
        const Eigen::VectorXd r = rhat(trimmed);
        std::ofstream rep((out_dir / "rhat.csv").string());
        rep << "parameter,rhat\n";
        char buf[64];
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s,%.6f\n", priors.names[static_cast<std::size_t>(i)].c_str(), r(i));
            rep << buf;
        }
        outputs.push_back("rhat.csv");
    }

    json snapshot;
    snapshot["version"] = tool_version();
    snapshot["model"] = config.at("model");
    snapshot["params"] = config.at("params");
    snapshot["protocol"] = config.at("protocol");
    snapshot["data"] = data_path;
    snapshot["discrepancy"] = discrepancy_name(discrepancy.kind);
    snapshot["kernel"] = kernel_family_name(discrepancy.kernel);
    snapshot["inducing"] = discrepancy.resolved_inducing_counts();
    snapshot["gp_dense"] = discrepancy.gp_dense;
    snapshot["arma_p"] = discrepancy.arma_p;
    snapshot["arma_q"] = discrepancy.arma_q;
    snapshot["arma_phi_center"] = discrepancy.arma_phi_center;
    snapshot["arma_zeta_center"] = discrepancy.arma_zeta_center;
    snapshot["priors"] = priors_to_json(priors);
    snapshot["chains"] = chains;
    snapshot["iterations"] = opts.iterations;
    snapshot["burn_in"] = opts.burn_in == 0 ? opts.iterations / 2 : opts.burn_in;
    snapshot["seed"] = seed;
    snapshot["map"] = {{"point", vector_to_json(init_natural)}, {"value", map_value}};
    json acceptance = json::array();
    for (const auto& c : chain_results) acceptance.push_back(c.acceptance_rate);
    snapshot["acceptance_rates"] = acceptance;
    save_json(snapshot, (out_dir / "snapshot.json").string());
    outputs.push_back("snapshot.json");

    json effective = config;
    effective["seed"] = seed;
    json manifest = make_manifest(
        "sample", effective, {config.at("model"), config.at("params"), config.at("protocol"), data_path},
        outputs);
    save_json(manifest, (out_dir / "manifest.json").string());
    return manifest;
}

namespace {

struct CalibrationRun {
    LoadedProblem problem;
    Trace data;
    DiscrepancyModel discrepancy;
    PriorSpec priors;
    std::vector<PosteriorSamples> chains;
    json snapshot;
};

CalibrationRun load_run(const std::string& run_dir) {
    CalibrationRun run;
    run.snapshot = load_json((fs::path(run_dir) / "snapshot.json").string(), "run snapshot");
    const json& snap = run.snapshot;
    json problem_config;
    problem_config["model"] = snap.at("model");
    problem_config["params"] = snap.at("params");
    problem_config["protocol"] = snap.at("protocol");
    run.problem = load_problem(problem_config);
    run.data = load_trace(snap.at("data").get<std::string>());

    run.discrepancy.kind = discrepancy_from_name(snap.at("discrepancy").get<std::string>());
    run.discrepancy.kernel = kernel_family_from_name(snap.at("kernel").get<std::string>());
    run.discrepancy.inducing_counts = snap.at("inducing").get<std::vector<int>>();
    run.discrepancy.gp_dense = snap.value("gp_dense", false);
    run.discrepancy.arma_p = snap.value("arma_p", 2);
    run.discrepancy.arma_q = snap.value("arma_q", 2);
    run.discrepancy.arma_phi_center = snap.value("arma_phi_center", std::vector<double>{});
    run.discrepancy.arma_zeta_center = snap.value("arma_zeta_center", std::vector<double>{});
    run.priors = priors_from_json(snap.at("priors"));

    const int chains = snap.at("chains").get<int>();
    for (int c = 0; c < chains; ++c) {
        const fs::path path = fs::path(run_dir) / ("chain_" + std::to_string(c) + ".csv");
        run.chains.push_back(read_samples_csv(path.string()));
    }
    return run;
}

}  // namespace

json run_predict(const json& config) {
    const std::uint64_t seed = resolve_seed(config);
    const std::string run_dir = require_string(config, "run");
    const std::string protocol_path = require_string(config, "protocol");
    if (!fs::exists(protocol_path)) throw IoError("protocol not found: " + protocol_path);
    const fs::path out_dir = prepare_out_dir(config);

    CalibrationRun run = load_run(run_dir);
    const VoltageProtocol target_protocol = load_protocol(protocol_path);
    const std::vector<double> grid = grid_for(target_protocol, config);

    PosteriorEvaluator eval(run.problem.spec, run.problem.params, run.problem.protocol, run.data,
                            run.discrepancy, run.priors);

    const int requested = config.value("draws", 200);
    const auto picks = select_draws(run.chains, requested);

    std::vector<PredictiveDraw> draws;
    draws.reserve(picks.size());
    for (const auto& [chain, row] : picks) {
        const Eigen::VectorXd point = run.chains[static_cast<std::size_t>(chain)].draws.row(row).transpose();
        draws.push_back(conditional_predictive(eval, point, target_protocol, grid));
    }
    const PredictiveSummary summary = posterior_predictive_summary(draws);

    // predictive CSV
    const std::string pred_path = (out_dir / "predictive.csv").string();
    {
        std::ofstream out(pred_path);
        if (!out) throw IoError("cannot write: " + pred_path);
        out << "time_ms,voltage_mV,mean_pA,var_pA2,lo95_pA,hi95_pA\n";
        char buf[160];
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", grid[i],
                          target_protocol.voltage_at(grid[i]), summary.mean(k), summary.variance(k),
                          summary.lo95(k), summary.hi95(k));
            out << buf;
        }
    }

    // empirical quantiles of the conditional means, for audit
    const std::string quant_path = (out_dir / "predictive_quantiles.csv").string();
    {
        std::ofstream out(quant_path);
        out << "time_ms,q025_pA,q50_pA,q975_pA\n";
        char buf[128];
        std::vector<double> column;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            column.clear();
            for (const auto& d : draws)
                if (d.ok) column.push_back(d.mean(static_cast<Eigen::Index>(i)));
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", grid[i],
                          empirical_quantile(column, 0.025), empirical_quantile(column, 0.5),
                          empirical_quantile(column, 0.975));
            out << buf;
        }
    }

    std::vector<std::string> outputs{"predictive.csv", "predictive_quantiles.csv"};

    // trained-GP snapshot for the highest-posterior retained draw
    if (run.discrepancy.kind == DiscrepancyKind::GpTime ||
        run.discrepancy.kind == DiscrepancyKind::GpOpenVoltage) {
        int best_chain = 0;
        Eigen::Index best_row = 0;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < run.chains.size(); ++c)
            for (Eigen::Index r = 0; r < run.chains[c].log_posterior.size(); ++r)
                if (run.chains[c].log_posterior(r) > best_lp) {
                    best_lp = run.chains[c].log_posterior(r);
                    best_chain = static_cast<int>(c);
                    best_row = r;
                }
        const Eigen::VectorXd best = run.chains[static_cast<std::size_t>(best_chain)].draws.row(best_row).transpose();
        const DecodedPoint point = eval.decode(best);
        const SimResult calib_sim = eval.simulate_at(point.params);
        Eigen::VectorXd r(static_cast<Eigen::Index>(run.data.size()));
        for (std::size_t i = 0; i < run.data.size(); ++i)
            r(static_cast<Eigen::Index>(i)) = run.data.values[i] - calib_sim.current_pA[i];
        Standardizer st;
        const Eigen::MatrixXd train_inputs = eval.standardized_covariates(calib_sim, &st);
        FitcGpFit fit(point.kernel, train_inputs, eval.inducing_for(train_inputs), r, point.sigma);
        save_gp_snapshot(fit.snapshot(st), (out_dir / "gp_snapshot.json").string());
        outputs.push_back("gp_snapshot.json");
        outputs.push_back("gp_snapshot.bin");
    }

    json effective = config;
    effective["seed"] = seed;
    json manifest = make_manifest("predict", effective, {protocol_path}, outputs);
    manifest["variant"] = discrepancy_name(run.discrepancy.kind);
    manifest["draws_used"] = summary.used_draws;
    manifest["draws_dropped"] = summary.dropped_draws;
    manifest["degraded"] = summary.degraded;
    save_json(manifest, (out_dir / "manifest.json").string());
    return manifest;
}

json run_evaluate(const json& config) {
    const std::uint64_t seed = resolve_seed(config);
    const fs::path out_dir = prepare_out_dir(config);
    if (!config.contains("runs")) throw ParseError("config: missing field 'runs'");
    if (!config.contains("datasets")) throw ParseError("config: missing field 'datasets'");
    const int requested = config.value("draws", 200);

    std::vector<std::string> run_dirs = config.at("runs").get<std::vector<std::string>>();
    std::vector<std::string> column_labels;
    std::vector<CalibrationRun> runs;
    for (const auto& dir : run_dirs) {
        runs.push_back(load_run(dir));
        column_labels.push_back(discrepancy_name(runs.back().discrepancy.kind));
    }

    struct Dataset {
        std::string label;
        Trace data;
        VoltageProtocol protocol;
    };
    std::vector<Dataset> datasets;
    for (const auto& entry : config.at("datasets")) {
        Dataset d{entry.at("label").get<std::string>(), load_trace(entry.at("data").get<std::string>()),
                  load_protocol(entry.at("protocol").get<std::string>())};
        datasets.push_back(std::move(d));
    }

    ScoreTable rmse_table, loglik_table;
    rmse_table.column_labels = column_labels;
    loglik_table.column_labels = column_labels;
    rmse_table.values.resize(static_cast<Eigen::Index>(datasets.size()), static_cast<Eigen::Index>(runs.size()));
    loglik_table.values.resize(static_cast<Eigen::Index>(datasets.size()), static_cast<Eigen::Index>(runs.size()));
    for (const auto& d : datasets) {
        rmse_table.row_labels.push_back(d.label);
        loglik_table.row_labels.push_back(d.label);
    }

    for (std::size_t ri = 0; ri < runs.size(); ++ri) {
        CalibrationRun& run = runs[ri];
        PosteriorEvaluator eval(run.problem.spec, run.problem.params, run.problem.protocol, run.data,
                                run.discrepancy, run.priors);
        const auto picks = select_draws(run.chains, requested);

        for (std::size_t di = 0; di < datasets.size(); ++di) {
            const Dataset& ds = datasets[di];
            std::vector<PredictiveDraw> draws;
            std::vector<double> logliks;
            for (const auto& [chain, row] : picks) {
                const Eigen::VectorXd point =
                    run.chains[static_cast<std::size_t>(chain)].draws.row(row).transpose();
                draws.push_back(conditional_predictive(eval, point, ds.protocol, ds.data.times_ms));
                logliks.push_back(conditional_data_loglik(eval, point, ds.protocol, ds.data));
            }
            const PredictiveSummary summary = posterior_predictive_summary(draws);
            const Eigen::VectorXd observed =
                Eigen::Map<const Eigen::VectorXd>(ds.data.values.data(), static_cast<Eigen::Index>(ds.data.size()));
            rmse_table.values(static_cast<Eigen::Index>(di), static_cast<Eigen::Index>(ri)) =
                rmse(summary.mean, observed);
            loglik_table.values(static_cast<Eigen::Index>(di), static_cast<Eigen::Index>(ri)) =
                posterior_predictive_loglik(logliks);
        }
    }

    const ScoreTable relative = relative_score_table(loglik_table);
    const std::vector<std::string> footnotes{
        "posterior predictive log-likelihoods; rows shifted so the best variant scores 0",
        "care is needed when interpreting GP-variant values: the FITC approximation replaces the full likelihood"};

    spit_file((out_dir / "rmse.csv").string(),
              score_table_csv(rmse_table, {"RMSE (pA) of posterior-mean predictions"}));
    spit_file((out_dir / "rmse.txt").string(), score_table_text(rmse_table));
    spit_file((out_dir / "loglik.csv").string(),
              score_table_csv(loglik_table, {"posterior predictive log-likelihoods (absolute)"}));
    spit_file((out_dir / "loglik_relative.csv").string(), score_table_csv(relative, footnotes));
    spit_file((out_dir / "loglik_relative.txt").string(), score_table_text(relative));

    json effective = config;
    effective["seed"] = seed;
    json manifest = make_manifest("evaluate", effective, {},
                                  {"rmse.csv", "rmse.txt", "loglik.csv", "loglik_relative.csv",
                                   "loglik_relative.txt"});
    save_json(manifest, (out_dir / "manifest.json").string());
    return manifest;
}

}  // namespace ioncalib
