#pragma once

#include <cstddef>
#include <vector>

namespace ioncalib {

// ARMA(p, q) residual model: e_i = sum_j phi_j e_{i-j} + nu_i + sum_k zeta_k nu_{i-k},
// nu_i ~ N(0, tau^2). Pre-sample innovations are fixed at zero (their mean),
// giving the conditional likelihood over i = p+1..N.
struct ArmaSpec {
    int p = 0;
    int q = 0;
    std::vector<double> phi;   // AR coefficients, length p
    std::vector<double> zeta;  // MA coefficients, length q
    double tau = 1.0;          // innovation std, pA

    void validate() const;
};

// nu_i for i = p+1..N (returned vector has length N - p)
std::vector<double> arma_innovations(const std::vector<double>& residuals, const ArmaSpec& spec);

// -((N-p)/2) log(2 pi tau^2) - sum nu_i^2 / (2 tau^2)
double arma_log_likelihood(const std::vector<double>& residuals, const ArmaSpec& spec);

// tau^2 = sum nu^2 / (N - (2p + q + 1))
double arma_tau_squared_mle(const std::vector<double>& innovations, int p, int q, std::size_t n);

// Recursive one-step-ahead forecasts over model_mean: each step has variance
// tau^2; predicted residuals feed back into the AR history and future
// innovations enter as zero. Empty histories give the zero-mean mode where the
// forecast mean is exactly the model mean.
struct ArmaForecast {
    std::vector<double> mean;
    std::vector<double> variance;
};

ArmaForecast arma_forecast(const std::vector<double>& model_mean, std::vector<double> last_p_residuals,
                           std::vector<double> last_q_innovations, const ArmaSpec& spec);

// true when all roots of the AR (resp. MA) characteristic polynomial lie
// outside the unit circle; violations are reported, never enforced
bool arma_is_stationary(const ArmaSpec& spec);
bool arma_is_invertible(const ArmaSpec& spec);

}  // namespace ioncalib
