#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "arma.hpp"
#include "gp.hpp"
#include "model.hpp"
#include "priors.hpp"
#include "protocol.hpp"
#include "simulate.hpp"
#include "trace.hpp"

namespace ioncalib {

enum class DiscrepancyKind { Iid, GpTime, GpOpenVoltage, Arma };

DiscrepancyKind discrepancy_from_name(const std::string& name);  // iid | gp-t | gp-ov | arma
std::string discrepancy_name(DiscrepancyKind kind);

// Tagged error-model configuration; hyperparameters are sampled, this holds
// the structure (kernel family, inducing layout, ARMA orders, prior centers).
struct DiscrepancyModel {
    DiscrepancyKind kind = DiscrepancyKind::Iid;
    KernelFamily kernel = KernelFamily::RBF;
    std::vector<int> inducing_counts;  // default {256} for gp-t, {16,16} for gp-ov
    bool gp_dense = false;             // use the dense path instead of FITC (small N only)
    int arma_p = 2;
    int arma_q = 2;
    std::vector<double> arma_phi_center;   // Normal prior centers from the MLE pre-pass
    std::vector<double> arma_zeta_center;

    std::vector<int> resolved_inducing_counts() const;
};

// One decoded sampling point.
struct DecodedPoint {
    ParameterVector params;
    double sigma = 0.0;        // iid and GP variants
    KernelSpec kernel;         // GP variants
    ArmaSpec arma;             // ARMA variant (tau profiled at evaluation time)
};

// Joint log-posterior over (theta, phi) for one calibration data set. Pure
// given its inputs; safe to call from several threads at once.
class PosteriorEvaluator {
  public:
    PosteriorEvaluator(ModelSpec spec, ParameterVector base_params, VoltageProtocol protocol, Trace data,
                       DiscrepancyModel discrepancy, PriorSpec priors);

    // natural-scale point ordered as priors().names
    double log_posterior(const Eigen::VectorXd& natural_point) const;

    // sampling-scale point (log coordinates where flagged), Jacobian included
    double log_posterior_sampling(const Eigen::VectorXd& sampling_point) const;

    double log_prior(const Eigen::VectorXd& natural_point) const { return priors_.log_density(natural_point); }
    double log_likelihood(const Eigen::VectorXd& natural_point) const;

    DecodedPoint decode(const Eigen::VectorXd& natural_point) const;

    const PriorSpec& priors() const { return priors_; }
    const DiscrepancyModel& discrepancy() const { return discrepancy_; }
    const ModelSpec& model() const { return spec_; }
    const ParameterVector& base_params() const { return base_params_; }
    const VoltageProtocol& protocol() const { return protocol_; }
    const Trace& data() const { return data_; }
    int theta_dims() const { return spec_.n_kinetic_params + 1; }
    int total_dims() const { return static_cast<int>(priors_.size()); }

    // diagnostics
    std::size_t simulator_calls() const { return sim_calls_.load(); }
    std::size_t numeric_failures() const { return numeric_failures_.load(); }
    std::size_t stationarity_violations() const { return stationarity_violations_.load(); }

    // residual of the mechanistic model at theta against the calibration data
    Eigen::VectorXd residual_at(const ParameterVector& params) const;
    SimResult simulate_at(const ParameterVector& params) const;
    SimResult simulate_on(const ParameterVector& params, const VoltageProtocol& protocol,
                          const std::vector<double>& grid) const;

    // GP covariates for this variant at the given simulation (standardized)
    Eigen::MatrixXd standardized_covariates(const SimResult& sim, Standardizer* out_std = nullptr) const;
    Eigen::MatrixXd inducing_for(const Eigen::MatrixXd& standardized) const;

  private:
    ModelSpec spec_;
    ParameterVector base_params_;
    VoltageProtocol protocol_;
    Trace data_;
    DiscrepancyModel discrepancy_;
    PriorSpec priors_;

    // gp-t covariates never change: standardize once
    Eigen::MatrixXd fixed_inputs_;
    Eigen::MatrixXd fixed_inducing_;
    Standardizer fixed_standardizer_;

    mutable std::atomic<std::size_t> sim_calls_{0};
    mutable std::atomic<std::size_t> numeric_failures_{0};
    mutable std::atomic<std::size_t> stationarity_violations_{0};
};

// Default priors for a variant: uniform box on (kinetics, g) scaled from the
// base parameter vector, Half-Normal(25) on sigma, Inverse-Gamma(5,5) on GP
// alpha/rho (standardized scale), Normal(center, 2.5) on ARMA coefficients.
struct PriorConfig {
    double box_lo_factor = 0.1;
    double box_hi_factor = 10.0;
    double sigma_halfnormal_scale = 25.0;
    double gp_invgamma_shape = 5.0;
    double gp_invgamma_scale = 5.0;
    double arma_normal_sd = 2.5;
};

PriorSpec default_priors(const ModelSpec& spec, const ParameterVector& base_params,
                         const DiscrepancyModel& discrepancy, const PriorConfig& config = {});

// Initial ARMA coefficient MLE for prior centering: maximize the conditional
// likelihood over (phi, zeta) with tau profiled out.
std::pair<std::vector<double>, std::vector<double>> arma_coefficient_mle(const Eigen::VectorXd& residual,
                                                                         int p, int q, std::uint64_t seed);

}  // namespace ioncalib
