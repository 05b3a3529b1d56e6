#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "json.hpp"

namespace ioncalib {

using nlohmann::json;

int ModelSpec::state_index(const std::string& state_name) const {
    for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i] == state_name) return static_cast<int>(i);
    return -1;
}

namespace {

void validate_spec(const ModelSpec& spec) {
    if (spec.states.empty()) throw ValidationError("model '" + spec.name + "': no states declared");
    std::set<std::string> seen;
    for (const auto& s : spec.states)
        if (!seen.insert(s).second) throw ValidationError("duplicate state name '" + s + "'");

    if (spec.open_states.empty())
        throw ValidationError("model '" + spec.name + "': open set is empty");

    // connectivity over the undirected edge graph (trivially connected for 1 state)
    const int n = spec.n_states();
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : spec.edges) {
        adj[e.from].push_back(e.to);
        adj[e.to].push_back(e.from);
    }
    std::vector<char> visited(n, 0);
    std::vector<int> stack{0};
    visited[0] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : adj[v])
            if (!visited[w]) {
                visited[w] = 1;
                stack.push_back(w);
            }
    }
    if (std::count(visited.begin(), visited.end(), 1) != n)
        throw ValidationError("model '" + spec.name + "': edge graph is not connected");

    // rate indices must cover 0..K-1 with no gaps
    std::set<int> indices;
    for (const auto& e : spec.edges) {
        indices.insert(e.a_index);
        indices.insert(e.b_index);
    }
    int k = static_cast<int>(indices.size());
    for (int i = 0; i < k; ++i)
        if (!indices.count(i))
            throw ValidationError("model '" + spec.name + "': rate indices must cover 0.." +
                                  std::to_string(k - 1) + " without gaps");
    if (spec.n_kinetic_params != 2 * k)
        throw ValidationError("model '" + spec.name + "': n_kinetic_params mismatch");
}

}  // namespace

ModelSpec parse_model_spec(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model document: ") + e.what());
    }

    auto require = [&](const char* field) -> const json& {
        if (!doc.contains(field)) throw ParseError(std::string("model document: missing field '") + field + "'");
        return doc.at(field);
    };

    ModelSpec spec;
    spec.name = require("name").get<std::string>();
    for (const auto& s : require("states")) spec.states.push_back(s.get<std::string>());

    for (const auto& e : require("edges")) {
        EdgeSpec edge;
        const std::string from = e.at("from").get<std::string>();
        const std::string to = e.at("to").get<std::string>();
        edge.from = spec.state_index(from);
        edge.to = spec.state_index(to);
        if (edge.from < 0) throw ValidationError("edge references undeclared state '" + from + "'");
        if (edge.to < 0) throw ValidationError("edge references undeclared state '" + to + "'");
        if (!e.contains("rate")) throw ParseError("edge " + from + "->" + to + ": missing field 'rate'");
        const auto& r = e.at("rate");
        if (!r.contains("a_index")) throw ParseError("edge " + from + "->" + to + ": missing field 'rate.a_index'");
        if (!r.contains("b_index")) throw ParseError("edge " + from + "->" + to + ": missing field 'rate.b_index'");
        edge.a_index = r.at("a_index").get<int>();
        edge.b_index = r.at("b_index").get<int>();
        edge.b_sign = r.value("b_sign", +1);
        if (edge.b_sign != 1 && edge.b_sign != -1)
            throw ParseError("edge " + from + "->" + to + ": rate.b_sign must be +1 or -1");
        if (edge.a_index < 0 || edge.b_index < 0)
            throw ParseError("edge " + from + "->" + to + ": rate indices must be >= 0");
        spec.edges.push_back(edge);
    }

    for (const auto& s : require("open")) {
        const std::string name = s.get<std::string>();
        int idx = spec.state_index(name);
        if (idx < 0) throw ValidationError("open set references undeclared state '" + name + "'");
        spec.open_states.push_back(idx);
    }

    std::set<int> indices;
    for (const auto& e : spec.edges) {
        indices.insert(e.a_index);
        indices.insert(e.b_index);
    }
    spec.n_kinetic_params = 2 * static_cast<int>(indices.size());

    validate_spec(spec);
    return spec;
}

ModelSpec load_model_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("model not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model_spec(ss.str());
}

ParameterVector parse_parameters(const std::string& json_text, const ModelSpec& spec) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("parameter document: ") + e.what());
    }
    ParameterVector p;
    if (!doc.contains("kinetics")) throw ParseError("parameter document: missing field 'kinetics'");
    for (const auto& v : doc.at("kinetics")) p.kinetics.push_back(v.get<double>());
    p.conductance_nS = doc.value("conductance_nS", 0.0);
    p.reversal_mV = doc.value("reversal_mV", 0.0);
    validate_params(spec, p);
    return p;
}

ParameterVector load_parameters(const std::string& path, const ModelSpec& spec) {
    std::ifstream in(path);
    if (!in) throw IoError("parameters not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_parameters(ss.str(), spec);
}

void validate_params(const ModelSpec& spec, const ParameterVector& params) {
    if (static_cast<int>(params.kinetics.size()) != spec.n_kinetic_params)
        throw ContractError("parameter vector length " + std::to_string(params.kinetics.size()) +
                            " does not match model '" + spec.name + "' (expects " +
                            std::to_string(spec.n_kinetic_params) + ")");
    for (int i = 0; i < spec.n_kinetic_params / 2; ++i)
        if (!(params.a(i) > 0.0))
            throw ValidationError("kinetic parameter A_" + std::to_string(i) + " must be > 0");
    if (params.conductance_nS < 0.0) throw ValidationError("conductance must be >= 0");
}

double transition_rate(double A_per_ms, double B_per_mV, double V_mV) {
    const double arg = B_per_mV * V_mV;
    if (std::abs(arg) > 700.0 || !std::isfinite(arg))
        throw NumericError("transition rate overflow: A=" + std::to_string(A_per_ms) +
                           " B=" + std::to_string(B_per_mV) + " V=" + std::to_string(V_mV));
    const double k = A_per_ms * std::exp(arg);
    if (!std::isfinite(k))
        throw NumericError("transition rate not finite: A=" + std::to_string(A_per_ms) +
                           " B=" + std::to_string(B_per_mV) + " V=" + std::to_string(V_mV));
    return k;
}

Eigen::MatrixXd build_markov_matrix(const ModelSpec& spec, const ParameterVector& params, double V_mV) {
    validate_params(spec, params);
    const int n = spec.n_states();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : spec.edges) {
        const double k = transition_rate(params.a(e.a_index), e.b_sign * params.b(e.b_index), V_mV);
        m(e.to, e.from) += k;
        m(e.from, e.from) -= k;
    }
    return m;
}

Eigen::VectorXd steady_state(const ModelSpec& spec, const ParameterVector& params, double V_mV) {
    const int n = spec.n_states();
    if (n == 1) return Eigen::VectorXd::Ones(1);

    Eigen::MatrixXd m = build_markov_matrix(spec, params, V_mV);
    // replace one balance row by the normalization constraint
    Eigen::MatrixXd a = m;
    a.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        throw NumericError("steady state: singular/reducible chain at V=" + std::to_string(V_mV));
    Eigen::VectorXd x = lu.solve(rhs);

    if (!x.allFinite() || (m * x).lpNorm<Eigen::Infinity>() > 1e-9 || x.minCoeff() < -1e-9)
        throw NumericError("steady state: no valid stationary distribution at V=" + std::to_string(V_mV));
    x = x.cwiseMax(0.0);
    x /= x.sum();
    return x;
}

}  // namespace ioncalib
