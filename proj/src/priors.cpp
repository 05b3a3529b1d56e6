#include "priors.hpp"

#include <cmath>
#include <limits>

#include "errors.hpp"

namespace ioncalib {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.9189385332046727;
}  // namespace

double prior_log_density(const PriorDist& dist, double x) {
    return std::visit(
        [x](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformPrior>) {
                return (x >= d.lo && x <= d.hi) ? 0.0 : kNegInf;
            } else if constexpr (std::is_same_v<T, HalfNormalPrior>) {
                if (x < 0.0) return kNegInf;
                return std::log(2.0) - std::log(d.scale) - kHalfLog2Pi - 0.5 * (x / d.scale) * (x / d.scale);
            } else if constexpr (std::is_same_v<T, InverseGammaPrior>) {
                if (x <= 0.0) return kNegInf;
                return d.shape * std::log(d.scale) - std::lgamma(d.shape) - (d.shape + 1.0) * std::log(x) -
                       d.scale / x;
            } else {
                const double z = (x - d.center) / d.scale;
                return -std::log(d.scale) - kHalfLog2Pi - 0.5 * z * z;
            }
        },
        dist);
}

std::pair<double, double> prior_bounds(const PriorDist& dist) {
    return std::visit(
        [](const auto& d) -> std::pair<double, double> {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformPrior>) {
                return {d.lo, d.hi};
            } else if constexpr (std::is_same_v<T, HalfNormalPrior>) {
                return {1e-6 * d.scale, 40.0 * d.scale};
            } else if constexpr (std::is_same_v<T, InverseGammaPrior>) {
                return {1e-4, 1e4};
            } else {
                // optimizer box, not prior support: 4 sd covers the mass
                // without sending samplers deep into explosive regions
                return {d.center - 4.0 * d.scale, d.center + 4.0 * d.scale};
            }
        },
        dist);
}

void PriorSpec::validate() const {
    if (names.size() != dists.size() || transforms.size() != dists.size())
        throw ContractError("prior spec: names/dists/transforms lengths differ");
    for (std::size_t i = 0; i < dists.size(); ++i) {
        if (std::holds_alternative<UniformPrior>(dists[i])) {
            const auto& u = std::get<UniformPrior>(dists[i]);
            if (!(u.lo < u.hi)) throw ContractError("prior '" + names[i] + "': uniform needs lo < hi");
        }
        const bool positive_scale = std::visit(
            [](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, UniformPrior>)
                    return true;
                else
                    return d.scale > 0.0;
            },
            dists[i]);
        if (!positive_scale) throw ContractError("prior '" + names[i] + "': scale must be > 0");
        if (transforms[i] == Transform::Log) {
            auto [lo, hi] = prior_bounds(dists[i]);
            if (lo <= 0.0) throw ContractError("prior '" + names[i] + "': log transform needs positive support");
            (void)hi;
        }
    }
}

double PriorSpec::log_density(const Eigen::VectorXd& natural_point) const {
    if (static_cast<std::size_t>(natural_point.size()) != dists.size())
        throw ContractError("prior: point dimension mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < dists.size(); ++i) {
        total += prior_log_density(dists[i], natural_point(static_cast<Eigen::Index>(i)));
        if (total == kNegInf) return kNegInf;
    }
    return total;
}

Eigen::VectorXd PriorSpec::to_sampling(const Eigen::VectorXd& natural_point) const {
    Eigen::VectorXd out = natural_point;
    for (std::size_t i = 0; i < transforms.size(); ++i)
        if (transforms[i] == Transform::Log) out(static_cast<Eigen::Index>(i)) = std::log(natural_point(static_cast<Eigen::Index>(i)));
    return out;
}

Eigen::VectorXd PriorSpec::to_natural(const Eigen::VectorXd& sampling_point) const {
    Eigen::VectorXd out = sampling_point;
    for (std::size_t i = 0; i < transforms.size(); ++i)
        if (transforms[i] == Transform::Log) out(static_cast<Eigen::Index>(i)) = std::exp(sampling_point(static_cast<Eigen::Index>(i)));
    return out;
}

double PriorSpec::log_density_sampling(const Eigen::VectorXd& sampling_point) const {
    const Eigen::VectorXd natural = to_natural(sampling_point);
    double total = log_density(natural);
    if (total == kNegInf) return kNegInf;
    // Jacobian dx/ds = x for log-transformed coordinates
    for (std::size_t i = 0; i < transforms.size(); ++i)
        if (transforms[i] == Transform::Log) total += sampling_point(static_cast<Eigen::Index>(i));
    return total;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> PriorSpec::sampling_bounds() const {
    Eigen::VectorXd lo(static_cast<Eigen::Index>(size())), hi(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < dists.size(); ++i) {
        auto [natural_lo, natural_hi] = prior_bounds(dists[i]);
        if (transforms[i] == Transform::Log) {
            lo(static_cast<Eigen::Index>(i)) = std::log(natural_lo);
            hi(static_cast<Eigen::Index>(i)) = std::log(natural_hi);
        } else {
            lo(static_cast<Eigen::Index>(i)) = natural_lo;
            hi(static_cast<Eigen::Index>(i)) = natural_hi;
        }
    }
    return {lo, hi};
}

}  // namespace ioncalib
