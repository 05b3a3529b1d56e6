#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ioncalib {

struct McmcOptions {
    std::size_t iterations = 100000;
    std::size_t burn_in = 0;           // 0 -> iterations / 2
    std::size_t max_retained = 10000;  // thinning target after burn-in
    std::size_t warm_up = 200;         // iterations before adaptation starts
    double target_acceptance = 0.234;
    std::size_t heartbeat = 0;  // progress line to stderr every k iterations (0 = off)
    std::string heartbeat_label;
};

struct PosteriorSamples {
    Eigen::MatrixXd draws;  // retained x dims (post burn-in, thinned)
    Eigen::VectorXd log_posterior;
    std::vector<std::string> parameter_names;
    int chain_id = 0;
    double acceptance_rate = 0.0;
    std::size_t iterations = 0;
    std::size_t burn_in = 0;
    std::size_t thin = 1;
};

// Adaptive-covariance Metropolis: Gaussian proposals whose covariance tracks
// the running sample covariance (scaled 2.38^2/d), with a global log-scale
// factor tuned toward the target acceptance rate. Deterministic given seed.
PosteriorSamples mcmc_sample(const std::function<double(const Eigen::VectorXd&)>& log_posterior,
                             const Eigen::VectorXd& init, std::uint64_t seed, const McmcOptions& options,
                             int chain_id = 0);

// Split R-hat per parameter over >= 2 equal-length chains.
Eigen::VectorXd rhat(const std::vector<PosteriorSamples>& chains);

// 2.5% / 97.5% empirical quantiles per parameter.
struct CredibleInterval {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};
CredibleInterval credible_interval_95(const Eigen::MatrixXd& draws);
double empirical_quantile(std::vector<double> values, double prob);

}  // namespace ioncalib
