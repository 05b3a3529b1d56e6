#include "mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "errors.hpp"
#include "rng.hpp"

namespace ioncalib {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

PosteriorSamples mcmc_sample(const std::function<double(const Eigen::VectorXd&)>& log_posterior,
                             const Eigen::VectorXd& init, std::uint64_t seed, const McmcOptions& options,
                             int chain_id) {
    const int d = static_cast<int>(init.size());
    if (d < 1) throw ContractError("mcmc: empty initial point");
    double current_lp = log_posterior(init);
    if (!std::isfinite(current_lp)) throw ContractError("mcmc: log posterior not finite at the initial point");

    const std::size_t iterations = options.iterations;
    const std::size_t burn_in = options.burn_in > 0 ? options.burn_in : iterations / 2;
    if (burn_in >= iterations) throw ContractError("mcmc: burn-in must be shorter than the run");
    const std::size_t kept_raw = iterations - burn_in;
    const std::size_t thin = std::max<std::size_t>(1, (kept_raw + options.max_retained - 1) / options.max_retained);

    Rng rng(seed);
    Eigen::VectorXd x = init;

    // running moments for the Haario-style adaptation
    Eigen::VectorXd mean = init;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        const double s = 0.01 * (1.0 + std::abs(init(i)));
        cov(i, i) = s * s;
    }
    double log_scale = 0.0;
    const double base_scale = 2.38 * 2.38 / static_cast<double>(d);

    Eigen::LLT<Eigen::MatrixXd> chol(cov);
    Eigen::MatrixXd prop_factor = chol.matrixL();

    PosteriorSamples out;
    out.chain_id = chain_id;
    out.iterations = iterations;
    out.burn_in = burn_in;
    out.thin = thin;
    const std::size_t retained = (kept_raw + thin - 1) / thin;
    out.draws.resize(static_cast<Eigen::Index>(retained), d);
    out.log_posterior.resize(static_cast<Eigen::Index>(retained));

    std::size_t accepted = 0;
    std::size_t stored = 0;
    Eigen::VectorXd z(d), proposal(d);

    for (std::size_t it = 0; it < iterations; ++it) {
        for (int i = 0; i < d; ++i) z(i) = rng.normal();
        const double scale = std::sqrt(base_scale) * std::exp(0.5 * log_scale);
        proposal = x + scale * (prop_factor * z);

        const double prop_lp = log_posterior(proposal);
        double accept_prob = 0.0;
        if (prop_lp > current_lp) {
            accept_prob = 1.0;
        } else if (std::isfinite(prop_lp)) {
            accept_prob = std::exp(prop_lp - current_lp);
        }
        if (accept_prob > 0.0 && rng.uniform() < accept_prob) {
            x = proposal;
            current_lp = prop_lp;
            ++accepted;
        }

        if (it >= options.warm_up) {
            const double gamma = 1.0 / std::pow(static_cast<double>(it - options.warm_up + 2), 0.6);
            const Eigen::VectorXd delta = x - mean;
            mean += gamma * delta;
            cov += gamma * (delta * delta.transpose() - cov);
            log_scale += gamma * (accept_prob - options.target_acceptance);

            Eigen::MatrixXd stabilized = cov;
            stabilized.diagonal().array() += 1e-12;
            Eigen::LLT<Eigen::MatrixXd> llt(stabilized);
            if (llt.info() == Eigen::Success) prop_factor = llt.matrixL();
        }

        if (it >= burn_in && (it - burn_in) % thin == 0 && stored < retained) {
            out.draws.row(static_cast<Eigen::Index>(stored)) = x.transpose();
            out.log_posterior(static_cast<Eigen::Index>(stored)) = current_lp;
            ++stored;
        }

        if (options.heartbeat > 0 && (it + 1) % options.heartbeat == 0) {
            std::fprintf(stderr, "%s chain %d: iter %zu/%zu accept %.3f\n",
                         options.heartbeat_label.empty() ? "mcmc" : options.heartbeat_label.c_str(),
                         chain_id, it + 1, iterations,
                         static_cast<double>(accepted) / static_cast<double>(it + 1));
        }
    }

    out.draws.conservativeResize(static_cast<Eigen::Index>(stored), d);
    out.log_posterior.conservativeResize(static_cast<Eigen::Index>(stored));
    out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(iterations);

    for (Eigen::Index i = 0; i < out.log_posterior.size(); ++i)
        if (!std::isfinite(out.log_posterior(i)))
            throw NumericError("mcmc: retained a non-finite log posterior draw");
    return out;
}

Eigen::VectorXd rhat(const std::vector<PosteriorSamples>& chains) {
    if (chains.size() < 2) throw ContractError("rhat: needs at least 2 chains");
    const auto n_per_chain = chains.front().draws.rows();
    const auto d = chains.front().draws.cols();
    for (const auto& c : chains)
        if (c.draws.rows() != n_per_chain || c.draws.cols() != d)
            throw ContractError("rhat: chains must have equal retained lengths");
    const auto half = n_per_chain / 2;
    if (half < 2) throw ContractError("rhat: chains too short");

    // split each chain in half
    std::vector<Eigen::MatrixXd> splits;
    for (const auto& c : chains) {
        splits.push_back(c.draws.topRows(half));
        splits.push_back(c.draws.middleRows(half, half));
    }
    const double m = static_cast<double>(splits.size());
    const double n = static_cast<double>(half);

    Eigen::VectorXd result(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        // duplicated chains agree perfectly; split halves would still report
        // within-chain drift, so guard the degenerate case explicitly
        bool all_identical = true;
        for (std::size_t c = 1; c < chains.size() && all_identical; ++c)
            all_identical = (chains[c].draws.col(j) - chains[0].draws.col(j)).cwiseAbs().maxCoeff() == 0.0;
        if (all_identical) {
            result(j) = 1.0;
            continue;
        }
        double grand_mean = 0.0;
        std::vector<double> means, vars;
        for (const auto& s : splits) {
            const double mu = s.col(j).mean();
            means.push_back(mu);
            vars.push_back((s.col(j).array() - mu).square().sum() / (n - 1.0));
            grand_mean += mu;
        }
        grand_mean /= m;
        double b = 0.0;
        for (double mu : means) b += (mu - grand_mean) * (mu - grand_mean);
        b *= n / (m - 1.0);
        double w = 0.0;
        for (double v : vars) w += v;
        w /= m;
        if (w <= 1e-300) {
            result(j) = 1.0;  // degenerate within-chain variance (identical chains)
            continue;
        }
        const double var_plus = (n - 1.0) / n * w + b / n;
        result(j) = std::sqrt(var_plus / w);
    }
    return result;
}

double empirical_quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw ContractError("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

CredibleInterval credible_interval_95(const Eigen::MatrixXd& draws) {
    CredibleInterval ci;
    ci.lo.resize(draws.cols());
    ci.hi.resize(draws.cols());
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
        std::vector<double> col(draws.col(j).data(), draws.col(j).data() + draws.rows());
        ci.lo(j) = empirical_quantile(col, 0.025);
        ci.hi(j) = empirical_quantile(col, 0.975);
    }
    return ci;
}

}  // namespace ioncalib
