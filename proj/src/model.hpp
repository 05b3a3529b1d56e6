#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ioncalib {

// One directed transition. The rate law is
//   k(V) = A[a_index] * exp(b_sign * B[b_index] * V)
// where A/B pairs live in ParameterVector::kinetics and b_sign is +1 or -1,
// so deactivation rates carry no hidden negative-B convention.
struct EdgeSpec {
    int from = -1;
    int to = -1;
    int a_index = -1;
    int b_index = -1;
    int b_sign = +1;
};

// A Markov channel topology as data: Models A, B, C are configuration files,
// the engine below is structure-agnostic.
struct ModelSpec {
    std::string name;
    std::vector<std::string> states;
    std::vector<EdgeSpec> edges;
    std::vector<int> open_states;   // indices into states
    int n_kinetic_params = 0;       // 2 x number of distinct rate indices

    int n_states() const { return static_cast<int>(states.size()); }
    int state_index(const std::string& name) const;  // -1 when absent
};

struct ParameterVector {
    std::vector<double> kinetics;  // interleaved (A_i ms^-1, B_i mV^-1) pairs
    double conductance_nS = 0.0;
    double reversal_mV = 0.0;

    double a(int rate_index) const { return kinetics[2 * static_cast<std::size_t>(rate_index)]; }
    double b(int rate_index) const { return kinetics[2 * static_cast<std::size_t>(rate_index) + 1]; }
};

// Parse and validate a model document (JSON text). Throws ParseError on schema
// violations naming the offending field, ValidationError on graph problems.
ModelSpec parse_model_spec(const std::string& json_text);
ModelSpec load_model_spec(const std::string& path);

// Parameter file I/O (JSON: kinetics, conductance_nS, reversal_mV).
ParameterVector parse_parameters(const std::string& json_text, const ModelSpec& spec);
ParameterVector load_parameters(const std::string& path, const ModelSpec& spec);

// k = A * exp(B * V); throws NumericError when |B*V| > 700 or the result is
// not finite, reporting the offending (A, B, V).
double transition_rate(double A_per_ms, double B_per_mV, double V_mV);

// M with dx/dt = M x: M(j,i) = rate of edge i->j, M(i,i) = -sum of outgoing
// rates from i. Columns sum to zero by construction.
Eigen::MatrixXd build_markov_matrix(const ModelSpec& spec, const ParameterVector& params, double V_mV);

// x_inf with M x_inf = 0, sum = 1, entries >= 0. Throws NumericError when the
// chain is reducible/singular at this voltage.
Eigen::VectorXd steady_state(const ModelSpec& spec, const ParameterVector& params, double V_mV);

void validate_params(const ModelSpec& spec, const ParameterVector& params);

}  // namespace ioncalib
