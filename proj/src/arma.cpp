#include "arma.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "errors.hpp"

namespace ioncalib {

void ArmaSpec::validate() const {
    if (p < 0 || q < 0) throw ContractError("arma: orders must be >= 0");
    if (static_cast<int>(phi.size()) != p) throw ContractError("arma: phi length != p");
    if (static_cast<int>(zeta.size()) != q) throw ContractError("arma: zeta length != q");
    if (!(tau > 0.0)) throw ContractError("arma: tau must be > 0");
}

std::vector<double> arma_innovations(const std::vector<double>& residuals, const ArmaSpec& spec) {
    spec.validate();
    const auto n = residuals.size();
    const auto p = static_cast<std::size_t>(spec.p);
    if (n <= p) throw ContractError("arma: need more residuals than the AR order");

    // nu[0..p-1] hold the startup zeros so the recursion can index uniformly
    std::vector<double> nu(n, 0.0);
    for (std::size_t i = p; i < n; ++i) {
        double value = residuals[i];
        for (int j = 1; j <= spec.p; ++j) value -= spec.phi[static_cast<std::size_t>(j - 1)] * residuals[i - static_cast<std::size_t>(j)];
        for (int k = 1; k <= spec.q; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            // indices below p are the startup zeros, below 0 the pre-sample zeros
            if (i >= kk) value -= spec.zeta[kk - 1] * nu[i - kk];
        }
        nu[i] = value;
    }
    return {nu.begin() + static_cast<std::ptrdiff_t>(p), nu.end()};
}

double arma_log_likelihood(const std::vector<double>& residuals, const ArmaSpec& spec) {
    const std::vector<double> nu = arma_innovations(residuals, spec);
    const double tau2 = spec.tau * spec.tau;
    double ss = 0.0;
    for (double v : nu) ss += v * v;
    const auto m = static_cast<double>(nu.size());  // N - p terms
    return -0.5 * m * std::log(2.0 * M_PI * tau2) - ss / (2.0 * tau2);
}

double arma_tau_squared_mle(const std::vector<double>& innovations, int p, int q, std::size_t n) {
    const double denom = static_cast<double>(n) - static_cast<double>(2 * p + q + 1);
    if (denom <= 0.0) throw ContractError("arma tau MLE: N must exceed 2p+q+1");
    double ss = 0.0;
    for (double v : innovations) ss += v * v;
    return ss / denom;
}

ArmaForecast arma_forecast(const std::vector<double>& model_mean, std::vector<double> last_p_residuals,
                           std::vector<double> last_q_innovations, const ArmaSpec& spec) {
    spec.validate();
    if (last_p_residuals.empty()) last_p_residuals.assign(static_cast<std::size_t>(spec.p), 0.0);
    if (last_q_innovations.empty()) last_q_innovations.assign(static_cast<std::size_t>(spec.q), 0.0);
    if (static_cast<int>(last_p_residuals.size()) != spec.p)
        throw ContractError("arma forecast: residual history length != p");
    if (static_cast<int>(last_q_innovations.size()) != spec.q)
        throw ContractError("arma forecast: innovation history length != q");

    // histories are chronological (oldest first); phi_1 pairs with the newest
    ArmaForecast out;
    out.mean.reserve(model_mean.size());
    out.variance.assign(model_mean.size(), spec.tau * spec.tau);
    for (double f : model_mean) {
        double resid = 0.0;
        for (int j = 1; j <= spec.p; ++j)
            resid += spec.phi[static_cast<std::size_t>(j - 1)] * last_p_residuals[last_p_residuals.size() - static_cast<std::size_t>(j)];
        for (int k = 1; k <= spec.q; ++k)
            resid += spec.zeta[static_cast<std::size_t>(k - 1)] * last_q_innovations[last_q_innovations.size() - static_cast<std::size_t>(k)];
        out.mean.push_back(f + resid);
        if (spec.p > 0) {
            last_p_residuals.erase(last_p_residuals.begin());
            last_p_residuals.push_back(resid);  // forecast uses its own predicted residual
        }
        if (spec.q > 0) {
            last_q_innovations.erase(last_q_innovations.begin());
            last_q_innovations.push_back(0.0);  // expected value of a future innovation
        }
    }
    return out;
}

namespace {

// inverse characteristic roots = eigenvalues of the companion matrix
bool roots_inside_unit_circle(const std::vector<double>& coeffs) {
    const auto order = coeffs.size();
    if (order == 0) return true;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(order), static_cast<Eigen::Index>(order));
    for (std::size_t j = 0; j < order; ++j) companion(0, static_cast<Eigen::Index>(j)) = coeffs[j];
    for (std::size_t j = 1; j < order; ++j) companion(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j - 1)) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    return solver.eigenvalues().cwiseAbs().maxCoeff() < 1.0;
}

}  // namespace

bool arma_is_stationary(const ArmaSpec& spec) { return roots_inside_unit_circle(spec.phi); }

bool arma_is_invertible(const ArmaSpec& spec) {
    std::vector<double> negated;
    negated.reserve(spec.zeta.size());
    for (double z : spec.zeta) negated.push_back(-z);
    return roots_inside_unit_circle(negated);
}

}  // namespace ioncalib
