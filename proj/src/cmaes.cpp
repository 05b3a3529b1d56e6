#include "cmaes.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace ioncalib {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

CmaesResult cmaes_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const Eigen::VectorXd& initial, std::uint64_t seed, const CmaesOptions& options) {
    const int d = static_cast<int>(lower.size());
    if (upper.size() != d || initial.size() != d) throw ContractError("cmaes: dimension mismatch");
    for (int i = 0; i < d; ++i) {
        if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || !(lower(i) < upper(i)))
            throw ContractError("cmaes: bounds must be finite with lower < upper");
    }

    // work in normalized coordinates z in [0,1]^d
    const Eigen::VectorXd width = upper - lower;
    auto denormalize = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        return lower.array() + z.array() * width.array();
    };
    Eigen::VectorXd mean = ((initial - lower).array() / width.array()).cwiseMax(0.0).cwiseMin(1.0);

    const int lambda = options.population > 0
                           ? options.population
                           : 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(d))));
    const int mu = lambda / 2;
    Eigen::VectorXd weights(mu);
    for (int i = 0; i < mu; ++i)
        weights(i) = std::log(static_cast<double>(mu) + 0.5) - std::log(static_cast<double>(i) + 1.0);
    weights /= weights.sum();
    const double mu_eff = 1.0 / weights.squaredNorm();

    const double c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0);
    const double d_sigma =
        1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (d + 1.0)) - 1.0) + c_sigma;
    const double c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d);
    const double c_1 = 2.0 / ((d + 1.3) * (d + 1.3) + mu_eff);
    const double c_mu =
        std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0) * (d + 2.0) + mu_eff));
    const double chi_n = std::sqrt(static_cast<double>(d)) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));

    double sigma = options.initial_step;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd scales = Eigen::VectorXd::Ones(d);
    Eigen::VectorXd path_sigma = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd path_c = Eigen::VectorXd::Zero(d);
    const int eigen_interval = std::max(1, static_cast<int>(1.0 / ((c_1 + c_mu) * d * 10.0)));

    Rng rng(seed);
    CmaesResult result;
    result.best_value = kNegInf;
    bool any_finite = false;
    double stall_best = kNegInf;
    int stall_count = 0;

    std::vector<Eigen::VectorXd> zs(static_cast<std::size_t>(lambda)), ys(static_cast<std::size_t>(lambda)),
        xs(static_cast<std::size_t>(lambda));
    std::vector<double> values(static_cast<std::size_t>(lambda));

    int generation = 0;
    while (result.evaluations < options.max_evaluations) {
        ++generation;
        if (generation % eigen_interval == 0 || generation == 1) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
            if (eig.info() != Eigen::Success) throw NumericError("cmaes: eigendecomposition failed");
            basis = eig.eigenvectors();
            scales = eig.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
        }

        int evaluated = 0;
        for (int k = 0; k < lambda && result.evaluations < options.max_evaluations; ++k) {
            Eigen::VectorXd z(d), y(d), x(d);
            bool inside = false;
            for (int attempt = 0; attempt < 64 && !inside; ++attempt) {
                for (int i = 0; i < d; ++i) z(i) = rng.normal();
                y = basis * (scales.asDiagonal() * z);
                x = mean + sigma * y;
                inside = (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
            }
            if (!inside) {
                x = x.cwiseMax(0.0).cwiseMin(1.0);
                y = (x - mean) / sigma;
            }
            zs[static_cast<std::size_t>(k)] = std::move(z);
            ys[static_cast<std::size_t>(k)] = y;
            xs[static_cast<std::size_t>(k)] = x;
            double value = objective(denormalize(x));
            if (std::isnan(value)) value = kNegInf;
            values[static_cast<std::size_t>(k)] = value;
            if (std::isfinite(value)) any_finite = true;
            ++result.evaluations;
            ++evaluated;
            if (value > result.best_value) {
                result.best_value = value;
                result.best_point = denormalize(x);
            }
        }
        if (evaluated < lambda) break;  // budget exhausted mid-generation

        // an all-invalid generation carries no ranking signal: keep the
        // search anchored and contract until finite values reappear
        bool any_finite_this_gen = false;
        for (double v : values) any_finite_this_gen = any_finite_this_gen || std::isfinite(v);
        if (!any_finite_this_gen) {
            sigma *= 0.7;
            if (sigma < 1e-14) break;
            continue;
        }

        std::vector<int> order(static_cast<std::size_t>(lambda));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
        });

        const Eigen::VectorXd old_mean = mean;
        mean.setZero();
        Eigen::VectorXd y_weighted = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < mu; ++i) {
            mean += weights(i) * xs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
            y_weighted += weights(i) * ys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        }

        // C^{-1/2} (m' - m) / sigma
        const Eigen::VectorXd whitened =
            basis * (scales.cwiseInverse().asDiagonal() * (basis.transpose() * y_weighted));
        path_sigma = (1.0 - c_sigma) * path_sigma +
                     std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * whitened;
        const double expected_decay =
            std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * generation));
        const bool h_sigma = path_sigma.norm() / expected_decay < (1.4 + 2.0 / (d + 1.0)) * chi_n;
        path_c = (1.0 - c_c) * path_c;
        if (h_sigma) path_c += std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_weighted;

        Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < mu; ++i) {
            const Eigen::VectorXd& y = ys[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
            rank_mu += weights(i) * (y * y.transpose());
        }
        const double c1a = c_1 * (1.0 - (h_sigma ? 0.0 : 1.0) * c_c * (2.0 - c_c));
        cov = (1.0 - c1a - c_mu) * cov + c_1 * (path_c * path_c.transpose()) + c_mu * rank_mu;

        sigma *= std::exp((c_sigma / d_sigma) * (path_sigma.norm() / chi_n - 1.0));
        sigma = std::min(sigma, 10.0);

        // stagnation bookkeeping
        if (result.best_value > stall_best + options.tol_fun) {
            stall_best = result.best_value;
            stall_count = 0;
        } else {
            ++stall_count;
        }
        if (stall_count >= options.stall_generations) break;
        if (sigma < 1e-14) break;
    }

    result.generations = generation;
    if (!any_finite) throw NumericError("cmaes: every evaluation returned -inf");
    return result;
}

}  // namespace ioncalib
