#include "datagen.hpp"

#include "errors.hpp"
#include "rng.hpp"

namespace ioncalib {

Trace generate_synthetic_trace(const ModelSpec& spec, const ParameterVector& params,
                               const VoltageProtocol& protocol, const std::vector<double>& t_grid,
                               double sigma_pA, std::uint64_t seed, const Eigen::VectorXd& x0) {
    if (sigma_pA < 0.0) throw ContractError("generate: sigma must be >= 0");
    Trace trace = simulate_current(spec, params, protocol, t_grid, x0);
    if (sigma_pA > 0.0) {
        Rng rng(seed);
        for (auto& y : trace.values) y += rng.normal(0.0, sigma_pA);
    }
    return trace;
}

}  // namespace ioncalib
