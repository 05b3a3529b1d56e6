#include "predict.hpp"

#include <cmath>

#include "errors.hpp"

namespace ioncalib {

namespace {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// tau-hat^2 profiled on the calibration residuals for an ARMA draw
double arma_tau2_at(const DecodedPoint& point, const Eigen::VectorXd& calib_residual) {
    const std::vector<double> resid(calib_residual.data(), calib_residual.data() + calib_residual.size());
    const std::vector<double> nu = arma_innovations(resid, point.arma);
    return arma_tau_squared_mle(nu, point.arma.p, point.arma.q, resid.size());
}

}  // namespace

PredictiveDraw conditional_predictive(const PosteriorEvaluator& calibration,
                                      const Eigen::VectorXd& natural_point,
                                      const VoltageProtocol& predict_protocol,
                                      const std::vector<double>& t_grid) {
    const DecodedPoint point = calibration.decode(natural_point);
    PredictiveDraw out;
    try {
        const SimResult target_sim = calibration.simulate_on(point.params, predict_protocol, t_grid);
        const Eigen::VectorXd model_mean = to_eigen(target_sim.current_pA);
        const auto m = model_mean.size();

        switch (calibration.discrepancy().kind) {
            case DiscrepancyKind::Iid: {
                out.mean = model_mean;
                out.variance = Eigen::VectorXd::Constant(m, point.sigma * point.sigma);
                out.latent_variance = Eigen::VectorXd::Zero(m);
                break;
            }
            case DiscrepancyKind::GpTime:
            case DiscrepancyKind::GpOpenVoltage: {
                const SimResult calib_sim = calibration.simulate_at(point.params);
                Eigen::VectorXd r(static_cast<Eigen::Index>(calibration.data().size()));
                for (std::size_t i = 0; i < calibration.data().size(); ++i)
                    r(static_cast<Eigen::Index>(i)) = calibration.data().values[i] - calib_sim.current_pA[i];

                Standardizer st;
                const Eigen::MatrixXd train_inputs = calibration.standardized_covariates(calib_sim, &st);

                // target covariates standardized with the training statistics
                Eigen::MatrixXd target_raw(m, train_inputs.cols());
                if (calibration.discrepancy().kind == DiscrepancyKind::GpTime) {
                    for (Eigen::Index i = 0; i < m; ++i) target_raw(i, 0) = target_sim.times_ms[static_cast<std::size_t>(i)];
                } else {
                    for (Eigen::Index i = 0; i < m; ++i) {
                        target_raw(i, 0) = target_sim.open_probability[static_cast<std::size_t>(i)];
                        target_raw(i, 1) = target_sim.voltages_mV[static_cast<std::size_t>(i)];
                    }
                }
                const Eigen::MatrixXd target_inputs = st.apply(target_raw);

                GpPrediction pred;
                if (calibration.discrepancy().gp_dense) {
                    DenseGpFit fit(point.kernel, train_inputs, r, point.sigma);
                    pred = fit.predict(target_inputs, model_mean);
                } else {
                    FitcGpFit fit(point.kernel, train_inputs, calibration.inducing_for(train_inputs), r,
                                  point.sigma);
                    pred = fit.predict(target_inputs, model_mean);
                }
                out.mean = std::move(pred.mean);
                out.variance = std::move(pred.variance);
                out.latent_variance = std::move(pred.latent_variance);
                break;
            }
            case DiscrepancyKind::Arma: {
                const Eigen::VectorXd calib_residual = calibration.residual_at(point.params);
                const double tau2 = arma_tau2_at(point, calib_residual);
                ArmaSpec arma = point.arma;
                arma.tau = std::sqrt(std::max(tau2, 1e-300));
                const ArmaForecast fc =
                    arma_forecast(target_sim.current_pA, {}, {}, arma);  // zero-mean mode
                out.mean = to_eigen(fc.mean);
                out.variance = to_eigen(fc.variance);
                out.latent_variance = Eigen::VectorXd::Zero(m);
                break;
            }
        }
    } catch (const Error&) {
        out.ok = false;
    }
    return out;
}

double conditional_data_loglik(const PosteriorEvaluator& calibration, const Eigen::VectorXd& natural_point,
                               const VoltageProtocol& protocol, const Trace& target) {
    const DecodedPoint point = calibration.decode(natural_point);
    const SimResult target_sim = calibration.simulate_on(point.params, protocol, target.times_ms);
    Eigen::VectorXd target_residual(static_cast<Eigen::Index>(target.size()));
    for (std::size_t i = 0; i < target.size(); ++i)
        target_residual(static_cast<Eigen::Index>(i)) = target.values[i] - target_sim.current_pA[i];
    const auto m = static_cast<double>(target.size());

    switch (calibration.discrepancy().kind) {
        case DiscrepancyKind::Iid: {
            const double s2 = point.sigma * point.sigma;
            return -0.5 * m * std::log(2.0 * M_PI * s2) - target_residual.squaredNorm() / (2.0 * s2);
        }
        case DiscrepancyKind::GpTime:
        case DiscrepancyKind::GpOpenVoltage: {
            const SimResult calib_sim = calibration.simulate_at(point.params);
            Eigen::VectorXd r(static_cast<Eigen::Index>(calibration.data().size()));
            for (std::size_t i = 0; i < calibration.data().size(); ++i)
                r(static_cast<Eigen::Index>(i)) = calibration.data().values[i] - calib_sim.current_pA[i];
            Standardizer st;
            const Eigen::MatrixXd train_inputs = calibration.standardized_covariates(calib_sim, &st);

            Eigen::MatrixXd target_raw(target_residual.size(), train_inputs.cols());
            if (calibration.discrepancy().kind == DiscrepancyKind::GpTime) {
                for (Eigen::Index i = 0; i < target_residual.size(); ++i)
                    target_raw(i, 0) = target_sim.times_ms[static_cast<std::size_t>(i)];
            } else {
                for (Eigen::Index i = 0; i < target_residual.size(); ++i) {
                    target_raw(i, 0) = target_sim.open_probability[static_cast<std::size_t>(i)];
                    target_raw(i, 1) = target_sim.voltages_mV[static_cast<std::size_t>(i)];
                }
            }
            const Eigen::MatrixXd target_inputs = st.apply(target_raw);

            if (calibration.discrepancy().gp_dense) {
                DenseGpFit fit(point.kernel, train_inputs, r, point.sigma);
                return fit.conditional_loglik(target_inputs, target_residual);
            }
            FitcGpFit fit(point.kernel, train_inputs, calibration.inducing_for(train_inputs), r, point.sigma);
            return fit.conditional_loglik(target_inputs, target_residual);
        }
        case DiscrepancyKind::Arma: {
            const Eigen::VectorXd calib_residual = calibration.residual_at(point.params);
            const double tau2 = arma_tau2_at(point, calib_residual);
            ArmaSpec arma = point.arma;
            arma.tau = std::sqrt(std::max(tau2, 1e-300));
            const std::vector<double> resid(target_residual.data(),
                                            target_residual.data() + target_residual.size());
            return arma_log_likelihood(resid, arma);
        }
    }
    return -std::numeric_limits<double>::infinity();
}

PredictiveSummary posterior_predictive_summary(const std::vector<PredictiveDraw>& draws) {
    std::vector<const PredictiveDraw*> valid;
    int dropped = 0;
    for (const auto& d : draws) {
        if (d.ok)
            valid.push_back(&d);
        else
            ++dropped;
    }
    if (valid.empty()) throw ContractError("predictive summary: no valid draws");

    const auto m = valid.front()->mean.size();
    for (const auto* d : valid)
        if (d->mean.size() != m || d->variance.size() != m)
            throw ContractError("predictive summary: draw lengths differ");

    PredictiveSummary out;
    out.used_draws = static_cast<int>(valid.size());
    out.dropped_draws = dropped;
    out.degraded = dropped > 0 && static_cast<double>(dropped) > 0.01 * static_cast<double>(draws.size());

    Eigen::VectorXd mean_sum = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd second_moment_sum = Eigen::VectorXd::Zero(m);
    for (const auto* d : valid) {
        mean_sum += d->mean;
        second_moment_sum += d->variance + d->mean.cwiseProduct(d->mean);
    }
    const double k = static_cast<double>(valid.size());
    out.mean = mean_sum / k;
    out.variance = second_moment_sum / k - out.mean.cwiseProduct(out.mean);
    out.variance = out.variance.cwiseMax(0.0);
    const Eigen::VectorXd sd = out.variance.cwiseSqrt();
    out.lo95 = out.mean - 1.96 * sd;
    out.hi95 = out.mean + 1.96 * sd;
    return out;
}

Decomposition decompose_prediction(const PosteriorEvaluator& calibration, const Eigen::VectorXd& natural_point,
                                   const VoltageProtocol& predict_protocol, const std::vector<double>& t_grid) {
    const DecodedPoint point = calibration.decode(natural_point);
    const SimResult sim = calibration.simulate_on(point.params, predict_protocol, t_grid);
    const PredictiveDraw draw = conditional_predictive(calibration, natural_point, predict_protocol, t_grid);
    if (!draw.ok) throw NumericError("decompose: conditional prediction failed");

    Decomposition out;
    out.ode_only.kind = Trace::Kind::Current;
    out.ode_only.times_ms = sim.times_ms;
    out.ode_only.voltages_mV = sim.voltages_mV;
    out.ode_only.values = sim.current_pA;

    out.discrepancy.kind = Trace::Kind::Residual;
    out.discrepancy.times_ms = sim.times_ms;
    out.discrepancy.voltages_mV = sim.voltages_mV;
    out.discrepancy.values.resize(t_grid.size());
    out.combined = out.ode_only;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double disc = draw.mean(static_cast<Eigen::Index>(i)) - sim.current_pA[i];
        out.discrepancy.values[i] = disc;
        out.combined.values[i] = sim.current_pA[i] + disc;
    }
    out.band_sd = draw.variance.cwiseSqrt();
    return out;
}

}  // namespace ioncalib
