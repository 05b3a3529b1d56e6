#include "simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "errors.hpp"

namespace ioncalib {

namespace {

// log2 of the Pade-13 backward-error bound theta_13 (Higham 2005)
constexpr double kTheta13 = 5.371920351148152;

}  // namespace

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m) {
    const auto n = m.rows();
    const double norm = m.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
    int squarings = 0;
    if (norm > kTheta13) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta13))));
    const Eigen::MatrixXd a = m / std::pow(2.0, squarings);

    static const double c[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};

    const Eigen::MatrixXd a2 = a * a;
    const Eigen::MatrixXd a4 = a2 * a2;
    const Eigen::MatrixXd a6 = a4 * a2;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);

    const Eigen::MatrixXd u =
        a * (a6 * (c[13] * a6 + c[11] * a4 + c[9] * a2) + c[7] * a6 + c[5] * a4 + c[3] * a2 + c[1] * id);
    const Eigen::MatrixXd v =
        a6 * (c[12] * a6 + c[10] * a4 + c[8] * a2) + c[6] * a6 + c[4] * a4 + c[2] * a2 + c[0] * id;

    Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

std::vector<double> make_time_grid(double duration_ms, double dt_ms) {
    if (!(dt_ms > 0.0)) throw ContractError("time grid: dt must be > 0");
    const auto count = static_cast<std::size_t>(std::llround(duration_ms / dt_ms));
    std::vector<double> grid;
    grid.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = dt_ms * static_cast<double>(i);
        if (t > duration_ms) break;
        grid.push_back(t);
    }
    if (grid.empty()) throw ContractError("time grid: empty");
    return grid;
}

Eigen::MatrixXd integrate_states(const ModelSpec& spec, const ParameterVector& params,
                                 const VoltageProtocol& protocol, const std::vector<double>& t_grid,
                                 const Eigen::VectorXd& x0) {
    const int n = spec.n_states();
    if (x0.size() != n) throw ContractError("integrate_states: x0 length mismatch");
    if (std::abs(x0.sum() - 1.0) > 1e-8 || x0.minCoeff() < -1e-10)
        throw ContractError("integrate_states: x0 not on the simplex");
    if (t_grid.empty()) throw ContractError("integrate_states: empty grid");
    if (t_grid.front() < 0.0 || t_grid.back() > protocol.total_duration_ms())
        throw ContractError("integrate_states: grid outside protocol duration");

    const std::vector<double> bounds = protocol.segment_boundaries();

    // propagator cache, keyed by (voltage, interval); local to this call
    std::map<std::pair<double, double>, Eigen::MatrixXd> cache;
    auto propagator = [&](double v, double delta) -> const Eigen::MatrixXd& {
        auto key = std::make_pair(v, delta);
        auto it = cache.find(key);
        if (it == cache.end()) {
            Eigen::MatrixXd e = matrix_exponential(build_markov_matrix(spec, params, v) * delta);
            it = cache.emplace(key, std::move(e)).first;
        }
        return it->second;
    };

    Eigen::MatrixXd out(static_cast<Eigen::Index>(t_grid.size()), n);
    Eigen::VectorXd x = x0;
    double t_cur = 0.0;
    std::size_t seg = 0;  // segment containing t_cur: [bounds[seg], bounds[seg+1])

    auto advance_to = [&](double t_target) {
        while (t_cur < t_target) {
            while (seg + 2 < bounds.size() && t_cur >= bounds[seg + 1]) ++seg;
            const double seg_end = bounds[seg + 1];
            const double t_stop = std::min(t_target, seg_end);
            const double delta = t_stop - t_cur;
            if (delta > 0.0) {
                const double v = protocol.voltage_at(t_cur);
                x = propagator(v, delta) * x;
            }
            t_cur = t_stop;
        }
    };

    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (i > 0 && t_grid[i] < t_grid[i - 1]) throw ContractError("integrate_states: grid not sorted");
        advance_to(t_grid[i]);
        if (!x.allFinite()) throw NumericError("integrate_states: propagator produced non-finite state");
        const double total = x.sum();
        if (std::abs(total - 1.0) > 1e-8 || x.minCoeff() < -1e-10)
            throw NumericError("integrate_states: simplex drift |sum-1|=" + std::to_string(std::abs(total - 1.0)));
        out.row(static_cast<Eigen::Index>(i)) = x.cwiseMax(0.0).transpose();
    }
    return out;
}

SimResult simulate(const ModelSpec& spec, const ParameterVector& params, const VoltageProtocol& protocol,
                   const std::vector<double>& t_grid, const Eigen::VectorXd& x0) {
    const Eigen::VectorXd start =
        x0.size() > 0 ? x0 : steady_state(spec, params, protocol.initial_voltage()).eval();
    const Eigen::MatrixXd occ = integrate_states(spec, params, protocol, t_grid, start);

    SimResult r;
    r.times_ms = t_grid;
    r.voltages_mV.resize(t_grid.size());
    r.open_probability.resize(t_grid.size());
    r.current_pA.resize(t_grid.size());
    const double g = params.conductance_nS;
    const double e_rev = params.reversal_mV;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        double open = 0.0;
        for (int s : spec.open_states) open += occ(static_cast<Eigen::Index>(i), s);
        const double v = protocol.voltage_at(t_grid[i]);
        r.voltages_mV[i] = v;
        r.open_probability[i] = open;
        r.current_pA[i] = g * open * (v - e_rev);  // nS * mV = pA
    }
    return r;
}

Trace simulate_current(const ModelSpec& spec, const ParameterVector& params, const VoltageProtocol& protocol,
                       const std::vector<double>& t_grid, const Eigen::VectorXd& x0) {
    SimResult r = simulate(spec, params, protocol, t_grid, x0);
    Trace t;
    t.kind = Trace::Kind::Current;
    t.times_ms = std::move(r.times_ms);
    t.voltages_mV = std::move(r.voltages_mV);
    t.values = std::move(r.current_pA);
    return t;
}

Trace simulate_open_probability(const ModelSpec& spec, const ParameterVector& params,
                                const VoltageProtocol& protocol, const std::vector<double>& t_grid,
                                const Eigen::VectorXd& x0) {
    SimResult r = simulate(spec, params, protocol, t_grid, x0);
    Trace t;
    t.kind = Trace::Kind::OpenProbability;
    t.times_ms = std::move(r.times_ms);
    t.voltages_mV = std::move(r.voltages_mV);
    t.values = std::move(r.open_probability);
    return t;
}

}  // namespace ioncalib
