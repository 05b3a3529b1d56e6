#pragma once

#include <string>
#include <vector>

namespace ioncalib {

// Voltage-clamp protocol V(t): either an explicit step sequence or a sampled
// series held piecewise-constant (zero-order hold). Steps are left-closed,
// [t_start, t_end): the new level applies at the boundary instant.
class VoltageProtocol {
  public:
    enum class Kind { Steps, Sampled };

    // a default-constructed protocol is empty and must be assigned before use
    VoltageProtocol() = default;

    static VoltageProtocol from_steps(std::vector<std::pair<double, double>> duration_level);
    static VoltageProtocol from_samples(double dt_ms, std::vector<double> voltages);

    Kind kind() const { return kind_; }
    double total_duration_ms() const { return total_duration_; }

    // V at time t; throws ContractError outside [0, total_duration]
    double voltage_at(double t_ms) const;

    // strictly increasing times where V may change, including 0 and the end
    std::vector<double> segment_boundaries() const;

    double initial_voltage() const { return voltage_at(0.0); }

    const std::vector<std::pair<double, double>>& steps() const { return steps_; }
    double sample_dt_ms() const { return dt_; }
    const std::vector<double>& samples() const { return samples_; }

  private:
    Kind kind_ = Kind::Steps;
    std::vector<std::pair<double, double>> steps_;  // (duration ms, level mV)
    double dt_ = 0.0;
    std::vector<double> samples_;
    double total_duration_ = 0.0;
};

// CSV loaders. Steps format has header duration_ms,voltage_mV; sampled format
// has header time_ms,voltage_mV on a uniform grid starting at 0.
VoltageProtocol load_protocol(const std::string& path);
VoltageProtocol parse_protocol_csv(const std::string& text, const std::string& origin);
void save_protocol(const VoltageProtocol& protocol, const std::string& path);

}  // namespace ioncalib
