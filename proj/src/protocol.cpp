#include "protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace ioncalib {

VoltageProtocol VoltageProtocol::from_steps(std::vector<std::pair<double, double>> duration_level) {
    if (duration_level.empty()) throw ValidationError("protocol: no steps");
    VoltageProtocol p;
    p.kind_ = Kind::Steps;
    p.total_duration_ = 0.0;
    for (const auto& [dur, level] : duration_level) {
        if (!(dur > 0.0)) throw ValidationError("protocol: step duration must be > 0");
        if (!std::isfinite(level)) throw ValidationError("protocol: step level must be finite");
        p.total_duration_ += dur;
    }
    p.steps_ = std::move(duration_level);
    return p;
}

VoltageProtocol VoltageProtocol::from_samples(double dt_ms, std::vector<double> voltages) {
    if (!(dt_ms > 0.0)) throw ValidationError("protocol: sample dt must be > 0");
    if (voltages.size() < 2) throw ValidationError("protocol: sampled series needs at least 2 samples");
    VoltageProtocol p;
    p.kind_ = Kind::Sampled;
    p.dt_ = dt_ms;
    p.total_duration_ = dt_ms * static_cast<double>(voltages.size() - 1);
    p.samples_ = std::move(voltages);
    return p;
}

double VoltageProtocol::voltage_at(double t_ms) const {
    if (kind_ == Kind::Steps && steps_.empty()) throw ContractError("voltage_at: empty protocol");
    if (t_ms < 0.0 || t_ms > total_duration_)
        throw ContractError("voltage_at: t=" + std::to_string(t_ms) + " outside [0, " +
                            std::to_string(total_duration_) + "]");
    if (kind_ == Kind::Steps) {
        double start = 0.0;
        for (const auto& [dur, level] : steps_) {
            if (t_ms < start + dur) return level;
            start += dur;
        }
        return steps_.back().second;  // t == total duration
    }
    // zero-order hold on the sample grid
    auto idx = static_cast<std::size_t>(std::floor(t_ms / dt_));
    if (idx >= samples_.size()) idx = samples_.size() - 1;
    return samples_[idx];
}

std::vector<double> VoltageProtocol::segment_boundaries() const {
    std::vector<double> bounds{0.0};
    if (kind_ == Kind::Steps) {
        double start = 0.0;
        for (const auto& [dur, level] : steps_) {
            start += dur;
            bounds.push_back(start);
        }
    } else {
        for (std::size_t i = 1; i < samples_.size(); ++i)
            bounds.push_back(dt_ * static_cast<double>(i));
    }
    return bounds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        // trim spaces and a trailing CR
        while (!field.empty() && (field.back() == ' ' || field.back() == '\r' || field.back() == '\t'))
            field.pop_back();
        std::size_t b = 0;
        while (b < field.size() && (field[b] == ' ' || field[b] == '\t')) ++b;
        out.push_back(field.substr(b));
    }
    return out;
}

double parse_number(const std::string& s, int line_no, const std::string& origin) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(origin + ":" + std::to_string(line_no) + ": malformed number '" + s + "'");
    }
}

}  // namespace

VoltageProtocol parse_protocol_csv(const std::string& text, const std::string& origin) {
    std::stringstream in(text);
    std::string line;
    int line_no = 0;
    std::string header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        header = line;
        break;
    }
    auto header_fields = split_csv_line(header);
    const bool steps = header_fields == std::vector<std::string>{"duration_ms", "voltage_mV"};
    const bool sampled = header_fields == std::vector<std::string>{"time_ms", "voltage_mV"};
    if (!steps && !sampled)
        throw ParseError(origin + ":" + std::to_string(line_no) +
                         ": header must be duration_ms,voltage_mV or time_ms,voltage_mV");

    std::vector<std::pair<double, double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw ParseError(origin + ":" + std::to_string(line_no) + ": expected 2 columns, got " +
                             std::to_string(fields.size()));
        rows.emplace_back(parse_number(fields[0], line_no, origin), parse_number(fields[1], line_no, origin));
    }
    if (rows.empty()) throw ParseError(origin + ": no data rows");

    if (steps) return VoltageProtocol::from_steps(std::move(rows));

    // sampled: validate the uniform, monotone time grid
    if (rows[0].first != 0.0) throw ValidationError(origin + ": sampled time column must start at 0");
    if (rows.size() < 2) throw ValidationError(origin + ": sampled series needs at least 2 samples");
    const double dt = rows[1].first - rows[0].first;
    if (!(dt > 0.0)) throw ValidationError(origin + ": non-monotone time column");
    std::vector<double> voltages;
    voltages.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double expected = dt * static_cast<double>(i);
        if (i > 0 && rows[i].first <= rows[i - 1].first)
            throw ValidationError(origin + ": non-monotone time column at row " + std::to_string(i + 1));
        if (std::abs(rows[i].first - expected) > 1e-9 * std::max(1.0, expected))
            throw ValidationError(origin + ": time grid is not uniform at row " + std::to_string(i + 1));
        voltages.push_back(rows[i].second);
    }
    return VoltageProtocol::from_samples(dt, std::move(voltages));
}

VoltageProtocol load_protocol(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("protocol not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_protocol_csv(ss.str(), path);
}

void save_protocol(const VoltageProtocol& protocol, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write protocol: " + path);
    char buf[64];
    if (protocol.kind() == VoltageProtocol::Kind::Steps) {
        out << "duration_ms,voltage_mV\n";
        for (const auto& [dur, level] : protocol.steps()) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", dur, level);
            out << buf;
        }
    } else {
        out << "time_ms,voltage_mV\n";
        const double dt = protocol.sample_dt_ms();
        const auto& v = protocol.samples();
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", dt * static_cast<double>(i), v[i]);
            out << buf;
        }
    }
}

}  // namespace ioncalib
