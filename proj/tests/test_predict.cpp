#include <cmath>

#include "datagen.hpp"
#include "doctest.h"
#include "errors.hpp"
#include "helpers.hpp"
#include "predict.hpp"
#include "rng.hpp"

using namespace ioncalib;

namespace {

PredictiveDraw make_draw(std::vector<double> mean, std::vector<double> variance) {
    PredictiveDraw d;
    d.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    d.variance =
        Eigen::Map<const Eigen::VectorXd>(variance.data(), static_cast<Eigen::Index>(variance.size()));
    d.latent_variance = Eigen::VectorXd::Zero(d.mean.size());
    return d;
}

struct Calib {
    ModelSpec spec = testutil::two_state();
    ParameterVector truth = testutil::two_state_params(0.2, 0.05, 100.0, -85.0, 0.012, 0.018);
    // strictly positive B so the 0.1x-10x default box is well formed
    VoltageProtocol protocol = VoltageProtocol::from_steps({{400.0, -80.0}, {400.0, 20.0}});
    Trace data;
    std::vector<double> grid;

    Calib() {
        grid = make_time_grid(protocol.total_duration_ms(), 2.0);
        data = generate_synthetic_trace(spec, truth, protocol, grid, 5.0, 21);
    }

    PosteriorEvaluator evaluator(DiscrepancyKind kind) const {
        DiscrepancyModel d;
        d.kind = kind;
        if (kind == DiscrepancyKind::GpTime) d.inducing_counts = {32};
        if (kind == DiscrepancyKind::GpOpenVoltage) d.inducing_counts = {6, 6};
        if (kind == DiscrepancyKind::Arma) {
            d.arma_phi_center = {0.0, 0.0};
            d.arma_zeta_center = {0.0, 0.0};
        }
        return PosteriorEvaluator(spec, truth, protocol, data, d, default_priors(spec, truth, d));
    }

    Eigen::VectorXd theta_with(std::vector<double> extra) const {
        std::vector<double> values(truth.kinetics.begin(), truth.kinetics.end());
        values.push_back(truth.conductance_nS);
        values.insert(values.end(), extra.begin(), extra.end());
        return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
};

}  // namespace

TEST_CASE("iid conditional predictive is the model mean with constant variance") {
    Calib c;
    const auto eval = c.evaluator(DiscrepancyKind::Iid);
    const double sigma = 7.0;
    const auto draw = conditional_predictive(eval, c.theta_with({sigma}), c.protocol, c.grid);
    REQUIRE(draw.ok);
    const Trace clean = simulate_current(c.spec, c.truth, c.protocol, c.grid);
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        CHECK(draw.mean(static_cast<Eigen::Index>(i)) == doctest::Approx(clean.values[i]));
        CHECK(draw.variance(static_cast<Eigen::Index>(i)) == doctest::Approx(sigma * sigma));
    }
}

TEST_CASE("gp-t predictive reverts to the prior beyond the training span") {
    Calib c;
    const auto eval = c.evaluator(DiscrepancyKind::GpTime);
    const double sigma = 5.0, alpha = 8.0, rho = 0.5;
    const Eigen::VectorXd point = c.theta_with({sigma, alpha, rho});

    // predict on a protocol four times longer than the calibration one
    const VoltageProtocol longer = VoltageProtocol::from_steps({{3200.0, -80.0}});
    const auto far_grid = make_time_grid(3200.0, 4.0);
    const auto draw = conditional_predictive(eval, point, longer, far_grid);
    REQUIRE(draw.ok);
    const Eigen::Index last = draw.latent_variance.size() - 1;
    CHECK(draw.latent_variance(last) == doctest::Approx(alpha * alpha).epsilon(1e-6));
    CHECK(draw.variance(last) == doctest::Approx(alpha * alpha + sigma * sigma).epsilon(1e-6));
}

TEST_CASE("gp-ov conditioning reduces the error against a constructed discrepancy") {
    // data = two-state truth + a discrepancy that is a function of (O, V):
    // delta = 20 * O * (V > -40); fit variant gp-ov at fixed theta and check
    // the combined prediction beats the bare model mean on the same protocol
    Calib c;
    const Trace clean = simulate_current(c.spec, c.truth, c.protocol, c.grid);
    const Trace open = simulate_open_probability(c.spec, c.truth, c.protocol, c.grid);
    Trace discrepant = clean;
    Rng rng(77);
    for (std::size_t i = 0; i < discrepant.size(); ++i) {
        const double v = c.protocol.voltage_at(c.grid[i]);
        discrepant.values[i] += 20.0 * open.values[i] * (v > -40.0 ? 1.0 : 0.0) + rng.normal(0.0, 1.0);
    }

    DiscrepancyModel d;
    d.kind = DiscrepancyKind::GpOpenVoltage;
    d.inducing_counts = {8, 8};
    PosteriorEvaluator eval(c.spec, c.truth, c.protocol, discrepant, d,
                            default_priors(c.spec, c.truth, d));
    const Eigen::VectorXd point = c.theta_with({1.0, 15.0, 1.0, 1.0});
    const auto draw = conditional_predictive(eval, point, c.protocol, c.grid);
    REQUIRE(draw.ok);

    double rmse_model = 0.0, rmse_combined = 0.0;
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        const double e_model = discrepant.values[i] - clean.values[i];
        const double e_comb = discrepant.values[i] - draw.mean(static_cast<Eigen::Index>(i));
        rmse_model += e_model * e_model;
        rmse_combined += e_comb * e_comb;
    }
    CHECK(std::sqrt(rmse_combined) < 0.5 * std::sqrt(rmse_model));
}

TEST_CASE("arma zero-mean predictive keeps the model mean and tau-hat variance") {
    Calib c;
    const auto eval = c.evaluator(DiscrepancyKind::Arma);
    const Eigen::VectorXd point = c.theta_with({0.4, 0.1, 0.2, 0.05});
    const auto draw = conditional_predictive(eval, point, c.protocol, c.grid);
    REQUIRE(draw.ok);
    const Trace clean = simulate_current(c.spec, c.truth, c.protocol, c.grid);
    for (std::size_t i = 0; i < c.grid.size(); ++i)
        CHECK(draw.mean(static_cast<Eigen::Index>(i)) == doctest::Approx(clean.values[i]));
    // all variances equal tau-hat^2 > 0
    CHECK(draw.variance.minCoeff() > 0.0);
    CHECK(draw.variance.maxCoeff() == doctest::Approx(draw.variance.minCoeff()));
}

TEST_CASE("single-draw summary is that draw") {
    const auto draw = make_draw({1.0, 2.0}, {0.5, 0.25});
    const PredictiveSummary s = posterior_predictive_summary({draw});
    CHECK(s.mean(0) == 1.0);
    CHECK(s.mean(1) == 2.0);
    CHECK(s.variance(0) == 0.5);
    CHECK(s.variance(1) == 0.25);
    CHECK(s.used_draws == 1);
}

TEST_CASE("the two-draw mixture hand example") {
    const PredictiveSummary s =
        posterior_predictive_summary({make_draw({0.0}, {1.0}), make_draw({2.0}, {1.0})});
    CHECK(s.mean(0) == doctest::Approx(1.0));
    CHECK(s.variance(0) == doctest::Approx(2.0));
}

TEST_CASE("bounds are mean +/- 1.96 sd") {
    auto deterministic = make_draw({0.0}, {4.0});
    const PredictiveSummary s = posterior_predictive_summary({deterministic});
    CHECK(s.lo95(0) == doctest::Approx(-3.92));
    CHECK(s.hi95(0) == doctest::Approx(3.92));
}

TEST_CASE("empty draw list is a contract error") {
    CHECK_THROWS_AS(posterior_predictive_summary({}), ContractError);
    PredictiveDraw bad;
    bad.ok = false;
    CHECK_THROWS_AS(posterior_predictive_summary({bad}), ContractError);
}

TEST_CASE("law of total variance holds over randomized draw sets") {
    Rng rng(55);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + static_cast<int>(rng.uniform() * 8);
        std::vector<PredictiveDraw> draws;
        double mean_cond_var = 0.0;
        for (int i = 0; i < k; ++i) {
            const double m = rng.normal(0.0, 10.0);
            const double v = 0.1 + rng.uniform() * 5.0;
            draws.push_back(make_draw({m}, {v}));
            mean_cond_var += v;
        }
        mean_cond_var /= k;
        const PredictiveSummary s = posterior_predictive_summary(draws);
        CHECK(s.variance(0) >= mean_cond_var - 1e-12);
    }
}

TEST_CASE("summary is permutation invariant and exact for identical draws") {
    const auto a = make_draw({1.0, -2.0}, {0.3, 0.7});
    const auto b = make_draw({4.0, 0.0}, {1.1, 0.2});
    const auto c = make_draw({-1.0, 1.0}, {0.9, 0.4});
    const PredictiveSummary s1 = posterior_predictive_summary({a, b, c});
    const PredictiveSummary s2 = posterior_predictive_summary({c, a, b});
    CHECK((s1.mean - s2.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s1.variance - s2.variance).cwiseAbs().maxCoeff() < 1e-12);

    const PredictiveSummary same = posterior_predictive_summary({a, a, a});
    CHECK(same.variance(0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(same.variance(1) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("dropped draws are counted and flagged beyond one percent") {
    std::vector<PredictiveDraw> draws;
    for (int i = 0; i < 50; ++i) draws.push_back(make_draw({1.0}, {1.0}));
    PredictiveDraw bad;
    bad.ok = false;
    draws.push_back(bad);
    const PredictiveSummary s = posterior_predictive_summary(draws);
    CHECK(s.dropped_draws == 1);
    CHECK(s.degraded);  // 1/51 is ~2%
}

TEST_CASE("decomposition: iid discrepancy is identically zero") {
    Calib c;
    const auto eval = c.evaluator(DiscrepancyKind::Iid);
    const auto decomp = decompose_prediction(eval, c.theta_with({5.0}), c.protocol, c.grid);
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        CHECK(decomp.discrepancy.values[i] == 0.0);
        CHECK(decomp.combined.values[i] == decomp.ode_only.values[i]);
    }
}

TEST_CASE("decomposition: near-noiseless gp reproduces the data at training points") {
    Calib c;
    DiscrepancyModel d;
    d.kind = DiscrepancyKind::GpTime;
    d.gp_dense = true;  // interpolation check wants the exact dense path
    PosteriorEvaluator eval(c.spec, c.truth, c.protocol, c.data, d, default_priors(c.spec, c.truth, d));
    // a length-scale near the grid spacing lets the GP track the iid noise
    const Eigen::VectorXd point = c.theta_with({1e-3, 30.0, 0.01});
    const auto decomp = decompose_prediction(eval, point, c.protocol, c.grid);
    for (std::size_t i = 0; i < c.grid.size(); ++i)
        CHECK(std::abs(decomp.combined.values[i] - c.data.values[i]) < 1e-4);
}

TEST_CASE("decomposition: arma zero-mean band is 1.96 tau wide") {
    Calib c;
    const auto eval = c.evaluator(DiscrepancyKind::Arma);
    const Eigen::VectorXd point = c.theta_with({0.3, 0.1, 0.1, 0.0});
    const auto decomp = decompose_prediction(eval, point, c.protocol, c.grid);
    for (std::size_t i = 0; i < c.grid.size(); ++i)
        CHECK(decomp.discrepancy.values[i] == 0.0);
    CHECK(decomp.band_sd.minCoeff() > 0.0);
    CHECK(decomp.band_sd.maxCoeff() == doctest::Approx(decomp.band_sd.minCoeff()));
}
