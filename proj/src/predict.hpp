#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "posterior.hpp"

namespace ioncalib {

// One posterior draw's conditional predictive on a target protocol. For GP
// variants the GP is conditioned on the calibration residuals at that draw;
// ARMA runs in zero-mean mode (no conditioning on the observed discrepancy
// sequence), so its mean is the mechanistic mean with variance tau-hat^2.
struct PredictiveDraw {
    Eigen::VectorXd mean;             // pA
    Eigen::VectorXd variance;         // observation level, pA^2
    Eigen::VectorXd latent_variance;  // GP variants: excludes sigma^2 (zero for iid/arma)
    bool ok = true;
};

PredictiveDraw conditional_predictive(const PosteriorEvaluator& calibration,
                                      const Eigen::VectorXd& natural_point,
                                      const VoltageProtocol& predict_protocol,
                                      const std::vector<double>& t_grid);

// log p(target | draw, calibration data) under the active variant, used for
// posterior-predictive scoring. GP variants use the same path (FITC or dense)
// as calibration.
double conditional_data_loglik(const PosteriorEvaluator& calibration, const Eigen::VectorXd& natural_point,
                               const VoltageProtocol& protocol, const Trace& target);

struct PredictiveSummary {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
    Eigen::VectorXd lo95;
    Eigen::VectorXd hi95;
    int used_draws = 0;
    int dropped_draws = 0;
    bool degraded = false;  // > 1% of draws dropped
};

// Mixture moments over draws: E = mean of means, Var = mean(var + mean^2) - E^2,
// bounds at +/- 1.96 sd.
PredictiveSummary posterior_predictive_summary(const std::vector<PredictiveDraw>& draws);

// MAP-style decomposition: mechanistic-only mean, conditional discrepancy mean
// and their sum, plus the discrepancy band sd for residual plots.
struct Decomposition {
    Trace ode_only;
    Trace discrepancy;
    Trace combined;
    Eigen::VectorXd band_sd;
};

Decomposition decompose_prediction(const PosteriorEvaluator& calibration, const Eigen::VectorXd& natural_point,
                                   const VoltageProtocol& predict_protocol, const std::vector<double>& t_grid);

}  // namespace ioncalib
