#pragma once

#include <string>
#include <vector>

namespace ioncalib {

// Aligned time/voltage/value series, the universal I/O record. Values are pA
// for Current, dimensionless for OpenProbability, pA for Residual.
struct Trace {
    enum class Kind { Current, OpenProbability, Residual };

    std::vector<double> times_ms;
    std::vector<double> voltages_mV;
    std::vector<double> values;
    Kind kind = Kind::Current;

    std::size_t size() const { return times_ms.size(); }
    void validate() const;  // strictly increasing times, equal lengths
};

std::string trace_kind_name(Trace::Kind kind);
std::string trace_unit_name(Trace::Kind kind);

// CSV with a leading metadata comment line, e.g.
//   # kind=Current unit=pA
//   time_ms,voltage_mV,value
void save_trace(const Trace& trace, const std::string& path);
Trace load_trace(const std::string& path);

}  // namespace ioncalib
