#pragma once

#include <Eigen/Dense>
#include <vector>

#include "model.hpp"
#include "protocol.hpp"
#include "trace.hpp"

namespace ioncalib {

// Dense matrix exponential, scaling-and-squaring with the degree-13 Pade
// approximant. Models here have <= 6 states so this is always cheap.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m);

// Output grid covering [0, duration) with uniform spacing dt.
std::vector<double> make_time_grid(double duration_ms, double dt_ms);

// Occupancies at each grid time (rows = grid points, columns = states).
// Exact per constant-voltage segment via x(t+d) = exp(M d) x(t); the
// exponential cache is local to the call, so concurrent use needs no locks.
Eigen::MatrixXd integrate_states(const ModelSpec& spec, const ParameterVector& params,
                                 const VoltageProtocol& protocol, const std::vector<double>& t_grid,
                                 const Eigen::VectorXd& x0);

// One integration yielding both observables; used by the likelihood code so a
// single propagation serves current and open-probability covariates.
struct SimResult {
    std::vector<double> times_ms;
    std::vector<double> voltages_mV;
    std::vector<double> open_probability;
    std::vector<double> current_pA;
};

// x0 empty (size 0) selects the steady state at the protocol's initial voltage
SimResult simulate(const ModelSpec& spec, const ParameterVector& params, const VoltageProtocol& protocol,
                   const std::vector<double>& t_grid, const Eigen::VectorXd& x0 = Eigen::VectorXd());

// I(t) = g * O(t) * (V(t) - E)
Trace simulate_current(const ModelSpec& spec, const ParameterVector& params, const VoltageProtocol& protocol,
                       const std::vector<double>& t_grid, const Eigen::VectorXd& x0 = Eigen::VectorXd());

Trace simulate_open_probability(const ModelSpec& spec, const ParameterVector& params,
                                const VoltageProtocol& protocol, const std::vector<double>& t_grid,
                                const Eigen::VectorXd& x0 = Eigen::VectorXd());

}  // namespace ioncalib
