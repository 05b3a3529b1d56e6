#include "trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace ioncalib {

void Trace::validate() const {
    if (times_ms.size() != voltages_mV.size() || times_ms.size() != values.size())
        throw ValidationError("trace: column lengths differ");
    for (std::size_t i = 1; i < times_ms.size(); ++i)
        if (!(times_ms[i] > times_ms[i - 1]))
            throw ValidationError("trace: times not strictly increasing at row " + std::to_string(i));
}

std::string trace_kind_name(Trace::Kind kind) {
    switch (kind) {
        case Trace::Kind::Current: return "Current";
        case Trace::Kind::OpenProbability: return "OpenProbability";
        case Trace::Kind::Residual: return "Residual";
    }
    return "Current";
}

std::string trace_unit_name(Trace::Kind kind) {
    return kind == Trace::Kind::OpenProbability ? "1" : "pA";
}

void save_trace(const Trace& trace, const std::string& path) {
    trace.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace: " + path);
    out << "# kind=" << trace_kind_name(trace.kind) << " unit=" << trace_unit_name(trace.kind) << "\n";
    out << "time_ms,voltage_mV,value\n";
    char buf[96];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", trace.times_ms[i], trace.voltages_mV[i],
                      trace.values[i]);
        out << buf;
    }
}

Trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("trace not found: " + path);

    Trace trace;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.find("kind=OpenProbability") != std::string::npos)
                trace.kind = Trace::Kind::OpenProbability;
            else if (line.find("kind=Residual") != std::string::npos)
                trace.kind = Trace::Kind::Residual;
            continue;
        }
        if (!header_seen) {
            if (line != "time_ms,voltage_mV,value")
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": expected header time_ms,voltage_mV,value");
            header_seen = true;
            continue;
        }
        double t, v, y;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &v, &y) != 3)
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed row");
        trace.times_ms.push_back(t);
        trace.voltages_mV.push_back(v);
        trace.values.push_back(y);
    }
    if (!header_seen) throw ParseError(path + ": missing header");
    trace.validate();
    return trace;
}

}  // namespace ioncalib
