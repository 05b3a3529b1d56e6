#include "posterior.hpp"

#include <cmath>
#include <limits>

#include "cmaes.hpp"
#include "errors.hpp"

namespace ioncalib {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

DiscrepancyKind discrepancy_from_name(const std::string& name) {
    if (name == "iid") return DiscrepancyKind::Iid;
    if (name == "gp-t") return DiscrepancyKind::GpTime;
    if (name == "gp-ov") return DiscrepancyKind::GpOpenVoltage;
    if (name == "arma") return DiscrepancyKind::Arma;
    throw ParseError("unknown discrepancy variant '" + name + "' (expected iid, gp-t, gp-ov or arma)");
}

std::string discrepancy_name(DiscrepancyKind kind) {
    switch (kind) {
        case DiscrepancyKind::Iid: return "iid";
        case DiscrepancyKind::GpTime: return "gp-t";
        case DiscrepancyKind::GpOpenVoltage: return "gp-ov";
        case DiscrepancyKind::Arma: return "arma";
    }
    return "iid";
}

std::vector<int> DiscrepancyModel::resolved_inducing_counts() const {
    if (!inducing_counts.empty()) return inducing_counts;
    if (kind == DiscrepancyKind::GpTime) return {256};
    if (kind == DiscrepancyKind::GpOpenVoltage) return {16, 16};
    return {};
}

PriorSpec default_priors(const ModelSpec& spec, const ParameterVector& base_params,
                         const DiscrepancyModel& discrepancy, const PriorConfig& config) {
    validate_params(spec, base_params);
    PriorSpec priors;
    auto add = [&](const std::string& name, PriorDist dist, Transform t) {
        priors.names.push_back(name);
        priors.dists.push_back(dist);
        priors.transforms.push_back(t);
    };

    for (int i = 0; i < spec.n_kinetic_params; ++i) {
        const double center = base_params.kinetics[static_cast<std::size_t>(i)];
        if (!(center > 0.0))
            throw ContractError("default priors need strictly positive base kinetics (p" + std::to_string(i + 1) + ")");
        add("p" + std::to_string(i + 1),
            UniformPrior{config.box_lo_factor * center, config.box_hi_factor * center}, Transform::Log);
    }
    const double g = base_params.conductance_nS;
    if (!(g > 0.0)) throw ContractError("default priors need a positive base conductance");
    add("g", UniformPrior{config.box_lo_factor * g, config.box_hi_factor * g}, Transform::Log);

    switch (discrepancy.kind) {
        case DiscrepancyKind::Iid:
            add("sigma", HalfNormalPrior{config.sigma_halfnormal_scale}, Transform::Log);
            break;
        case DiscrepancyKind::GpTime:
            add("sigma", HalfNormalPrior{config.sigma_halfnormal_scale}, Transform::Log);
            add("alpha", InverseGammaPrior{config.gp_invgamma_shape, config.gp_invgamma_scale}, Transform::Log);
            add("rho_t", InverseGammaPrior{config.gp_invgamma_shape, config.gp_invgamma_scale}, Transform::Log);
            break;
        case DiscrepancyKind::GpOpenVoltage:
            add("sigma", HalfNormalPrior{config.sigma_halfnormal_scale}, Transform::Log);
            add("alpha", InverseGammaPrior{config.gp_invgamma_shape, config.gp_invgamma_scale}, Transform::Log);
            add("rho_o", InverseGammaPrior{config.gp_invgamma_shape, config.gp_invgamma_scale}, Transform::Log);
            add("rho_v", InverseGammaPrior{config.gp_invgamma_shape, config.gp_invgamma_scale}, Transform::Log);
            break;
        case DiscrepancyKind::Arma: {
            if (static_cast<int>(discrepancy.arma_phi_center.size()) != discrepancy.arma_p ||
                static_cast<int>(discrepancy.arma_zeta_center.size()) != discrepancy.arma_q)
                throw ContractError("arma priors need coefficient centers (run the MLE pre-pass)");
            for (int i = 0; i < discrepancy.arma_p; ++i)
                add("phi" + std::to_string(i + 1),
                    NormalPrior{discrepancy.arma_phi_center[static_cast<std::size_t>(i)], config.arma_normal_sd},
                    Transform::Identity);
            for (int i = 0; i < discrepancy.arma_q; ++i)
                add("zeta" + std::to_string(i + 1),
                    NormalPrior{discrepancy.arma_zeta_center[static_cast<std::size_t>(i)], config.arma_normal_sd},
                    Transform::Identity);
            break;
        }
    }
    priors.validate();
    return priors;
}

PosteriorEvaluator::PosteriorEvaluator(ModelSpec spec, ParameterVector base_params, VoltageProtocol protocol,
                                       Trace data, DiscrepancyModel discrepancy, PriorSpec priors)
    : spec_(std::move(spec)),
      base_params_(std::move(base_params)),
      protocol_(std::move(protocol)),
      data_(std::move(data)),
      discrepancy_(std::move(discrepancy)),
      priors_(std::move(priors)) {
    data_.validate();
    priors_.validate();
    validate_params(spec_, base_params_);
    if (data_.size() < 2) throw ContractError("posterior: calibration data too short");

    int expected = theta_dims();
    switch (discrepancy_.kind) {
        case DiscrepancyKind::Iid: expected += 1; break;
        case DiscrepancyKind::GpTime: expected += 3; break;
        case DiscrepancyKind::GpOpenVoltage: expected += 4; break;
        case DiscrepancyKind::Arma: expected += discrepancy_.arma_p + discrepancy_.arma_q; break;
    }
    if (expected != total_dims())
        throw ContractError("posterior: prior spec has " + std::to_string(total_dims()) +
                            " dimensions, variant needs " + std::to_string(expected));

    if (discrepancy_.kind == DiscrepancyKind::GpTime) {
        Eigen::MatrixXd inputs(static_cast<Eigen::Index>(data_.size()), 1);
        for (std::size_t i = 0; i < data_.size(); ++i) inputs(static_cast<Eigen::Index>(i), 0) = data_.times_ms[i];
        fixed_standardizer_ = Standardizer::fit(inputs);
        fixed_inputs_ = fixed_standardizer_.apply(inputs);
        fixed_inducing_ = inducing_grid(fixed_inputs_, discrepancy_.resolved_inducing_counts());
    }
}

DecodedPoint PosteriorEvaluator::decode(const Eigen::VectorXd& natural_point) const {
    if (natural_point.size() != total_dims()) throw ContractError("posterior: point dimension mismatch");
    DecodedPoint d;
    d.params = base_params_;
    d.params.kinetics.assign(natural_point.data(), natural_point.data() + spec_.n_kinetic_params);
    d.params.conductance_nS = natural_point(spec_.n_kinetic_params);

    int at = theta_dims();
    switch (discrepancy_.kind) {
        case DiscrepancyKind::Iid:
            d.sigma = natural_point(at);
            break;
        case DiscrepancyKind::GpTime:
            d.sigma = natural_point(at);
            d.kernel.family = discrepancy_.kernel;
            d.kernel.alpha = natural_point(at + 1);
            d.kernel.rho = {natural_point(at + 2)};
            break;
        case DiscrepancyKind::GpOpenVoltage:
            d.sigma = natural_point(at);
            d.kernel.family = discrepancy_.kernel;
            d.kernel.alpha = natural_point(at + 1);
            d.kernel.rho = {natural_point(at + 2), natural_point(at + 3)};
            break;
        case DiscrepancyKind::Arma:
            d.arma.p = discrepancy_.arma_p;
            d.arma.q = discrepancy_.arma_q;
            d.arma.phi.assign(natural_point.data() + at, natural_point.data() + at + discrepancy_.arma_p);
            d.arma.zeta.assign(natural_point.data() + at + discrepancy_.arma_p,
                               natural_point.data() + at + discrepancy_.arma_p + discrepancy_.arma_q);
            d.arma.tau = 1.0;  // profiled at evaluation time
            break;
    }
    return d;
}

SimResult PosteriorEvaluator::simulate_on(const ParameterVector& params, const VoltageProtocol& protocol,
                                          const std::vector<double>& grid) const {
    ++sim_calls_;
    return simulate(spec_, params, protocol, grid);
}

SimResult PosteriorEvaluator::simulate_at(const ParameterVector& params) const {
    return simulate_on(params, protocol_, data_.times_ms);
}

Eigen::VectorXd PosteriorEvaluator::residual_at(const ParameterVector& params) const {
    const SimResult sim = simulate_at(params);
    Eigen::VectorXd r(static_cast<Eigen::Index>(data_.size()));
    for (std::size_t i = 0; i < data_.size(); ++i)
        r(static_cast<Eigen::Index>(i)) = data_.values[i] - sim.current_pA[i];
    return r;
}

Eigen::MatrixXd PosteriorEvaluator::standardized_covariates(const SimResult& sim, Standardizer* out_std) const {
    if (discrepancy_.kind == DiscrepancyKind::GpTime) {
        if (out_std) *out_std = fixed_standardizer_;
        Eigen::MatrixXd inputs(static_cast<Eigen::Index>(sim.times_ms.size()), 1);
        for (std::size_t i = 0; i < sim.times_ms.size(); ++i)
            inputs(static_cast<Eigen::Index>(i), 0) = sim.times_ms[i];
        return fixed_standardizer_.apply(inputs);
    }
    if (discrepancy_.kind == DiscrepancyKind::GpOpenVoltage) {
        Eigen::MatrixXd inputs(static_cast<Eigen::Index>(sim.times_ms.size()), 2);
        for (std::size_t i = 0; i < sim.times_ms.size(); ++i) {
            inputs(static_cast<Eigen::Index>(i), 0) = sim.open_probability[i];
            inputs(static_cast<Eigen::Index>(i), 1) = sim.voltages_mV[i];
        }
        const Standardizer st = Standardizer::fit(inputs);
        if (out_std) *out_std = st;
        return st.apply(inputs);
    }
    throw ContractError("covariates requested for a non-GP variant");
}

Eigen::MatrixXd PosteriorEvaluator::inducing_for(const Eigen::MatrixXd& standardized) const {
    if (discrepancy_.kind == DiscrepancyKind::GpTime) return fixed_inducing_;
    return inducing_grid(standardized, discrepancy_.resolved_inducing_counts());
}

double PosteriorEvaluator::log_likelihood(const Eigen::VectorXd& natural_point) const {
    const DecodedPoint point = decode(natural_point);
    const auto n = static_cast<double>(data_.size());

    try {
        switch (discrepancy_.kind) {
            case DiscrepancyKind::Iid: {
                const Eigen::VectorXd r = residual_at(point.params);
                const double s2 = point.sigma * point.sigma;
                return -0.5 * n * std::log(2.0 * M_PI * s2) - r.squaredNorm() / (2.0 * s2);
            }
            case DiscrepancyKind::GpTime:
            case DiscrepancyKind::GpOpenVoltage: {
                const SimResult sim = simulate_at(point.params);
                Eigen::VectorXd r(static_cast<Eigen::Index>(data_.size()));
                for (std::size_t i = 0; i < data_.size(); ++i)
                    r(static_cast<Eigen::Index>(i)) = data_.values[i] - sim.current_pA[i];
                const Eigen::MatrixXd inputs = standardized_covariates(sim);
                if (discrepancy_.gp_dense)
                    return gp_marginal_loglik_dense(point.kernel, inputs, r, point.sigma);
                const Eigen::MatrixXd inducing = inducing_for(inputs);
                return gp_marginal_loglik_fitc(point.kernel, inputs, inducing, r, point.sigma);
            }
            case DiscrepancyKind::Arma: {
                const Eigen::VectorXd r = residual_at(point.params);
                ArmaSpec arma = point.arma;
                if (!arma_is_stationary(arma) || !arma_is_invertible(arma)) ++stationarity_violations_;
                const std::vector<double> resid(r.data(), r.data() + r.size());
                const std::vector<double> nu = arma_innovations(resid, arma);
                double ss = 0.0;
                for (double v : nu) ss += v * v;
                // explosive MA proposals overflow the recursion; report -inf
                if (!std::isfinite(ss) || !(ss > 0.0)) return kNegInf;
                const double tau2 = arma_tau_squared_mle(nu, arma.p, arma.q, resid.size());
                const auto m = static_cast<double>(nu.size());
                return -0.5 * m * std::log(2.0 * M_PI * tau2) - ss / (2.0 * tau2);
            }
        }
    } catch (const Error&) {
        ++numeric_failures_;
        return kNegInf;
    }
    return kNegInf;
}

double PosteriorEvaluator::log_posterior(const Eigen::VectorXd& natural_point) const {
    const double prior = priors_.log_density(natural_point);
    if (prior == kNegInf) return kNegInf;  // short-circuit, no simulation
    const double ll = log_likelihood(natural_point);
    if (!std::isfinite(ll)) return kNegInf;
    return prior + ll;
}

double PosteriorEvaluator::log_posterior_sampling(const Eigen::VectorXd& sampling_point) const {
    const double prior = priors_.log_density_sampling(sampling_point);
    if (prior == kNegInf) return kNegInf;
    const double ll = log_likelihood(priors_.to_natural(sampling_point));
    if (!std::isfinite(ll)) return kNegInf;
    return prior + ll;
}

std::pair<std::vector<double>, std::vector<double>> arma_coefficient_mle(const Eigen::VectorXd& residual,
                                                                         int p, int q, std::uint64_t seed) {
    const std::vector<double> resid(residual.data(), residual.data() + residual.size());
    const int dims = p + q;
    if (dims == 0) return {{}, {}};

    auto objective = [&](const Eigen::VectorXd& coeffs) -> double {
        ArmaSpec arma;
        arma.p = p;
        arma.q = q;
        arma.phi.assign(coeffs.data(), coeffs.data() + p);
        arma.zeta.assign(coeffs.data() + p, coeffs.data() + p + q);
        arma.tau = 1.0;
        try {
            const std::vector<double> nu = arma_innovations(resid, arma);
            double ss = 0.0;
            for (double v : nu) ss += v * v;
            if (!std::isfinite(ss) || !(ss > 0.0)) return kNegInf;
            const double tau2 = arma_tau_squared_mle(nu, p, q, resid.size());
            const auto m = static_cast<double>(nu.size());
            return -0.5 * m * std::log(2.0 * M_PI * tau2) - ss / (2.0 * tau2);
        } catch (const Error&) {
            return kNegInf;
        }
    };

    const Eigen::VectorXd lower = Eigen::VectorXd::Constant(dims, -2.0);
    const Eigen::VectorXd upper = Eigen::VectorXd::Constant(dims, 2.0);
    const Eigen::VectorXd init = Eigen::VectorXd::Zero(dims);
    CmaesOptions opts;
    opts.max_evaluations = 4000;
    const CmaesResult res = cmaes_maximize(objective, lower, upper, init, seed, opts);

    std::vector<double> phi(res.best_point.data(), res.best_point.data() + p);
    std::vector<double> zeta(res.best_point.data() + p, res.best_point.data() + p + q);
    return {phi, zeta};
}

}  // namespace ioncalib
