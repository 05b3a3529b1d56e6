#include <cmath>

#include "cmaes.hpp"
#include "datagen.hpp"
#include "doctest.h"
#include <atomic>
#include <thread>

#include "errors.hpp"
#include "helpers.hpp"
#include "posterior.hpp"
#include "rng.hpp"

using namespace ioncalib;

namespace {

struct Problem {
    ModelSpec spec = testutil::two_state();
    ParameterVector truth = testutil::two_state_params(0.2, 0.05, 100.0, -85.0, 0.012, 0.018);
    // strictly positive B so the 0.1x-10x default box is well formed
    VoltageProtocol protocol =
        VoltageProtocol::from_steps({{400.0, -80.0}, {400.0, 20.0}, {400.0, -40.0}});
    Trace data;
    std::vector<double> grid;

    explicit Problem(double sigma = 10.0, std::uint64_t seed = 4) {
        grid = make_time_grid(protocol.total_duration_ms(), 2.0);
        data = generate_synthetic_trace(spec, truth, protocol, grid, sigma, seed);
    }

    DiscrepancyModel variant(DiscrepancyKind kind) const {
        DiscrepancyModel d;
        d.kind = kind;
        if (kind == DiscrepancyKind::GpTime) d.inducing_counts = {32};
        if (kind == DiscrepancyKind::GpOpenVoltage) d.inducing_counts = {6, 6};
        if (kind == DiscrepancyKind::Arma) {
            d.arma_phi_center = {0.0, 0.0};
            d.arma_zeta_center = {0.0, 0.0};
        }
        return d;
    }

    PosteriorEvaluator evaluator(DiscrepancyKind kind) const {
        const DiscrepancyModel d = variant(kind);
        return PosteriorEvaluator(spec, truth, protocol, data, d, default_priors(spec, truth, d));
    }

    Eigen::VectorXd point_at_truth(DiscrepancyKind kind, double sigma = 10.0) const {
        std::vector<double> values(truth.kinetics.begin(), truth.kinetics.end());
        values.push_back(truth.conductance_nS);
        switch (kind) {
            case DiscrepancyKind::Iid: values.push_back(sigma); break;
            case DiscrepancyKind::GpTime:
                values.insert(values.end(), {sigma, 1.0, 1.0});
                break;
            case DiscrepancyKind::GpOpenVoltage:
                values.insert(values.end(), {sigma, 1.0, 1.0, 1.0});
                break;
            case DiscrepancyKind::Arma:
                values.insert(values.end(), {0.1, 0.05, 0.1, 0.05});
                break;
        }
        return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
};

}  // namespace

TEST_CASE("default priors lay out theta then variant hyperparameters") {
    Problem prob;
    const auto eval = prob.evaluator(DiscrepancyKind::GpOpenVoltage);
    CHECK(eval.priors().names ==
          std::vector<std::string>{"p1", "p2", "p3", "p4", "g", "sigma", "alpha", "rho_o", "rho_v"});
    CHECK(eval.total_dims() == 9);
    const auto arma_eval = prob.evaluator(DiscrepancyKind::Arma);
    CHECK(arma_eval.priors().names ==
          std::vector<std::string>{"p1", "p2", "p3", "p4", "g", "phi1", "phi2", "zeta1", "zeta2"});
}

TEST_CASE("points outside the uniform box short-circuit without simulating") {
    Problem prob;
    const auto eval = prob.evaluator(DiscrepancyKind::Iid);
    Eigen::VectorXd outside = prob.point_at_truth(DiscrepancyKind::Iid);
    outside(0) = prob.truth.kinetics[0] * 100.0;  // beyond the 10x box
    const auto calls_before = eval.simulator_calls();
    CHECK(eval.log_posterior(outside) == -std::numeric_limits<double>::infinity());
    CHECK(eval.simulator_calls() == calls_before);

    // inside the box the simulator runs
    const Eigen::VectorXd inside = prob.point_at_truth(DiscrepancyKind::Iid);
    CHECK(std::isfinite(eval.log_posterior(inside)));
    CHECK(eval.simulator_calls() == calls_before + 1);
}

TEST_CASE("iid likelihood with zero residuals is the pure normalizer plus prior") {
    Problem prob(0.0, 1);  // sigma = 0 -> data equals the simulation at truth
    const auto eval = prob.evaluator(DiscrepancyKind::Iid);
    const double sigma = 10.0;
    const Eigen::VectorXd point = prob.point_at_truth(DiscrepancyKind::Iid, sigma);
    const auto n = static_cast<double>(prob.data.size());
    const double expected_ll = -0.5 * n * std::log(2.0 * M_PI * sigma * sigma);
    CHECK(eval.log_posterior(point) ==
          doctest::Approx(eval.log_prior(point) + expected_ll).epsilon(1e-10));
}

TEST_CASE("gp-t likelihood collapses to iid as alpha vanishes") {
    Problem prob;
    DiscrepancyModel gp = prob.variant(DiscrepancyKind::GpTime);
    const auto gp_eval = PosteriorEvaluator(prob.spec, prob.truth, prob.protocol, prob.data, gp,
                                            default_priors(prob.spec, prob.truth, gp));
    const auto iid_eval = prob.evaluator(DiscrepancyKind::Iid);

    Eigen::VectorXd gp_point = prob.point_at_truth(DiscrepancyKind::GpTime);
    gp_point(6) = 1e-12;  // alpha
    const Eigen::VectorXd iid_point = prob.point_at_truth(DiscrepancyKind::Iid);
    CHECK(gp_eval.log_likelihood(gp_point) ==
          doctest::Approx(iid_eval.log_likelihood(iid_point)).epsilon(1e-5));
}

TEST_CASE("gp-ov covariates track the parameter-dependent open probability") {
    Problem prob;
    const auto eval = prob.evaluator(DiscrepancyKind::GpOpenVoltage);
    const DecodedPoint at_truth = eval.decode(prob.point_at_truth(DiscrepancyKind::GpOpenVoltage));
    ParameterVector other = prob.truth;
    other.kinetics[0] *= 2.0;
    const SimResult sim_truth = eval.simulate_at(at_truth.params);
    const SimResult sim_other = eval.simulate_at(other);
    const Eigen::MatrixXd cov_truth = eval.standardized_covariates(sim_truth);
    const Eigen::MatrixXd cov_other = eval.standardized_covariates(sim_other);
    CHECK(cov_truth.rows() == cov_other.rows());
    CHECK((cov_truth - cov_other).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("numeric failures inside the likelihood surface as -inf, not exceptions") {
    Problem prob;
    const auto eval = prob.evaluator(DiscrepancyKind::Iid);
    CHECK(eval.numeric_failures() == 0);
    // rate-law overflow (|B V| > 700), reachable through log_likelihood which
    // skips the prior guard
    Eigen::VectorXd point = prob.point_at_truth(DiscrepancyKind::Iid);
    point(1) = 12.0;  // B with V = -80 overflows exp
    CHECK(eval.log_likelihood(point) == -std::numeric_limits<double>::infinity());
    CHECK(eval.numeric_failures() == 1);
}

TEST_CASE("log posterior is bit-deterministic") {
    Problem prob;
    const auto eval = prob.evaluator(DiscrepancyKind::GpTime);
    const Eigen::VectorXd point = prob.point_at_truth(DiscrepancyKind::GpTime);
    const double a = eval.log_posterior(point);
    const double b = eval.log_posterior(point);
    CHECK(a == b);
}

TEST_CASE("arma variant profiles tau and counts stationarity violations") {
    Problem prob;
    const auto eval = prob.evaluator(DiscrepancyKind::Arma);
    Eigen::VectorXd point = prob.point_at_truth(DiscrepancyKind::Arma);
    CHECK(std::isfinite(eval.log_posterior(point)));
    CHECK(eval.stationarity_violations() == 0);

    point(5) = 1.6;  // phi1 + phi2 > 1: non-stationary but still evaluated
    const double lp = eval.log_posterior(point);
    CHECK(std::isfinite(lp));
    CHECK(eval.stationarity_violations() == 1);
}

TEST_CASE("sampling-scale posterior adds the transform jacobian") {
    Problem prob;
    const auto eval = prob.evaluator(DiscrepancyKind::Iid);
    const Eigen::VectorXd natural = prob.point_at_truth(DiscrepancyKind::Iid);
    const Eigen::VectorXd sampling = eval.priors().to_sampling(natural);
    double jacobian = 0.0;
    for (std::size_t i = 0; i < eval.priors().size(); ++i)
        if (eval.priors().transforms[i] == Transform::Log) jacobian += sampling(static_cast<Eigen::Index>(i));
    CHECK(eval.log_posterior_sampling(sampling) ==
          doctest::Approx(eval.log_posterior(natural) + jacobian).epsilon(1e-10));
}

TEST_CASE("self-consistency: map fit recovers the generating two-state parameters") {
    Problem prob(5.0, 12);
    const auto eval = prob.evaluator(DiscrepancyKind::Iid);
    auto [lower, upper] = eval.priors().sampling_bounds();
    const Eigen::VectorXd init = 0.5 * (lower + upper);
    CmaesOptions opts;
    opts.max_evaluations = 6000;
    const CmaesResult res = cmaes_maximize(
        [&](const Eigen::VectorXd& s) { return eval.log_posterior_sampling(s); }, lower, upper, init, 5,
        opts);
    const Eigen::VectorXd best = eval.priors().to_natural(res.best_point);
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(best(i) / prob.truth.kinetics[static_cast<std::size_t>(i)] - 1.0) < 0.05);
    CHECK(std::abs(best(4) / prob.truth.conductance_nS - 1.0) < 0.01);
}

TEST_CASE("one evaluator can serve several threads at once") {
    Problem prob;
    const auto eval = prob.evaluator(DiscrepancyKind::GpTime);
    const Eigen::VectorXd point = prob.point_at_truth(DiscrepancyKind::GpTime);
    const double reference = eval.log_posterior(point);

    std::vector<std::thread> pool;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t)
        pool.emplace_back([&] {
            for (int i = 0; i < 16; ++i)
                if (eval.log_posterior(point) != reference) ++mismatches;
        });
    for (auto& t : pool) t.join();
    CHECK(mismatches.load() == 0);
}

TEST_CASE("arma coefficient mle recovers strong autocorrelation") {
    // AR(2)-ish residuals: a slow sine plus noise has innovations far smaller
    // than the raw residual scale, so phi_1 near the oscillation structure
    Eigen::VectorXd residual(400);
    Rng rng(31);
    for (int i = 0; i < 400; ++i)
        residual(i) = 50.0 * std::sin(0.05 * i) + rng.normal(0.0, 1.0);
    auto [phi, zeta] = arma_coefficient_mle(residual, 2, 2, 9);
    ArmaSpec fitted;
    fitted.p = 2;
    fitted.q = 2;
    fitted.phi = phi;
    fitted.zeta = zeta;
    fitted.tau = 1.0;
    const std::vector<double> resid(residual.data(), residual.data() + residual.size());
    const auto nu = arma_innovations(resid, fitted);
    double ss = 0.0;
    for (double v : nu) ss += v * v;
    const double innovation_var = ss / static_cast<double>(nu.size());
    double raw_var = 0.0;
    for (double v : resid) raw_var += v * v;
    raw_var /= static_cast<double>(resid.size());
    CHECK(innovation_var < 0.05 * raw_var);  // the fit explains the structure
}
