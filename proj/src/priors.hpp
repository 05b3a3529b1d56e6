#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

namespace ioncalib {

// Per-parameter prior distributions. Uniform uses the unnormalized convention
// (0 inside the box) since constants cancel in MAP and MCMC.
struct UniformPrior {
    double lo = 0.0, hi = 1.0;
};
struct HalfNormalPrior {
    double scale = 1.0;
};
struct InverseGammaPrior {
    double shape = 1.0, scale = 1.0;
};
struct NormalPrior {
    double center = 0.0, scale = 1.0;
};

using PriorDist = std::variant<UniformPrior, HalfNormalPrior, InverseGammaPrior, NormalPrior>;

double prior_log_density(const PriorDist& dist, double x);

// sampling-space bounds used by the optimizer (natural scale)
std::pair<double, double> prior_bounds(const PriorDist& dist);

enum class Transform { Identity, Log };

struct PriorSpec {
    std::vector<std::string> names;
    std::vector<PriorDist> dists;
    std::vector<Transform> transforms;  // log-scale sampling for positive parameters

    std::size_t size() const { return dists.size(); }
    void validate() const;

    double log_density(const Eigen::VectorXd& natural_point) const;

    // natural <-> sampling space (log applied where flagged)
    Eigen::VectorXd to_sampling(const Eigen::VectorXd& natural_point) const;
    Eigen::VectorXd to_natural(const Eigen::VectorXd& sampling_point) const;

    // log prior in sampling coordinates, including the Jacobian of the
    // transform; -inf outside support
    double log_density_sampling(const Eigen::VectorXd& sampling_point) const;

    // bounds in sampling coordinates (finite for the optimizer)
    std::pair<Eigen::VectorXd, Eigen::VectorXd> sampling_bounds() const;
};

}  // namespace ioncalib
