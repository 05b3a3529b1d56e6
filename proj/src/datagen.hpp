#pragma once

#include <cstdint>

#include "model.hpp"
#include "protocol.hpp"
#include "simulate.hpp"
#include "trace.hpp"

namespace ioncalib {

// Noiseless simulation plus i.i.d. N(0, sigma^2) draws, bit-reproducible from
// the seed (xoshiro256++ / Box-Muller, see rng.hpp).
Trace generate_synthetic_trace(const ModelSpec& spec, const ParameterVector& params,
                               const VoltageProtocol& protocol, const std::vector<double>& t_grid,
                               double sigma_pA, std::uint64_t seed,
                               const Eigen::VectorXd& x0 = Eigen::VectorXd());

}  // namespace ioncalib
