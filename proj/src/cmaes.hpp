#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace ioncalib {

struct CmaesOptions {
    int max_evaluations = 20000;
    int population = 0;         // 0 -> 4 + floor(3 ln d)
    double initial_step = 0.3;  // relative to the bound widths
    double tol_fun = 1e-12;     // stop when the recent best range collapses
    int stall_generations = 60;
};

struct CmaesResult {
    Eigen::VectorXd best_point;
    double best_value = 0.0;
    int evaluations = 0;
    int generations = 0;
};

// Maximizes `objective` inside [lower, upper]. Out-of-bound proposals are
// resampled (up to a cap, then clamped). Deterministic given the seed.
// Throws OptimizationError via ioncalib::NumericError when every evaluation
// is -inf.
CmaesResult cmaes_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const Eigen::VectorXd& initial, std::uint64_t seed,
                           const CmaesOptions& options = {});

}  // namespace ioncalib
