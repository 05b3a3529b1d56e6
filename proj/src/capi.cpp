#include "ioncalib/ioncalib.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "errors.hpp"
#include "model.hpp"
#include "protocol.hpp"
#include "runner.hpp"
#include "simulate.hpp"
#include "trace.hpp"

using namespace ioncalib;

struct ioncalib_model {
    ModelSpec spec;
};
struct ioncalib_protocol {
    VoltageProtocol protocol;
};
struct ioncalib_trace {
    Trace trace;
};

namespace {

thread_local std::string g_last_error;

ioncalib_status status_from(const Error& e) {
    switch (e.code()) {
        case ErrorCode::Io: return IONCALIB_ERR_IO;
        case ErrorCode::Parse: return IONCALIB_ERR_PARSE;
        case ErrorCode::Validation: return IONCALIB_ERR_VALIDATION;
        case ErrorCode::Numeric: return IONCALIB_ERR_NUMERIC;
        case ErrorCode::Contract: return IONCALIB_ERR_CONTRACT;
        case ErrorCode::Unknown: return IONCALIB_ERR_UNKNOWN;
    }
    return IONCALIB_ERR_UNKNOWN;
}

template <typename Fn>
ioncalib_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return IONCALIB_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_from(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return IONCALIB_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown error";
        return IONCALIB_ERR_UNKNOWN;
    }
}

ioncalib_status require(bool ok, const char* msg) {
    if (ok) return IONCALIB_OK;
    g_last_error = msg;
    return IONCALIB_ERR_CONTRACT;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

using RunnerFn = nlohmann::json (*)(const nlohmann::json&);

ioncalib_status run_command(RunnerFn fn, const char* config_json, char** out_manifest_json) {
    if (require(config_json != nullptr, "config_json is NULL") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    return guarded([&] {
        nlohmann::json config;
        try {
            config = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("config: ") + e.what());
        }
        const nlohmann::json manifest = fn(config);
        if (out_manifest_json) *out_manifest_json = dup_string(manifest.dump(2));
    });
}

}  // namespace

extern "C" {

const char* ioncalib_version(void) { return tool_version(); }

const char* ioncalib_last_error(void) { return g_last_error.c_str(); }

ioncalib_status ioncalib_model_load(const char* path, ioncalib_model** out) {
    if (require(path && out, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    return guarded([&] { *out = new ioncalib_model{load_model_spec(path)}; });
}

void ioncalib_model_free(ioncalib_model* model) { delete model; }

ioncalib_status ioncalib_model_name(const ioncalib_model* model, const char** out) {
    if (require(model && out, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    *out = model->spec.name.c_str();
    return IONCALIB_OK;
}

ioncalib_status ioncalib_model_state_count(const ioncalib_model* model, size_t* out) {
    if (require(model && out, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    *out = model->spec.states.size();
    return IONCALIB_OK;
}

ioncalib_status ioncalib_model_param_count(const ioncalib_model* model, size_t* out) {
    if (require(model && out, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    *out = static_cast<size_t>(model->spec.n_kinetic_params) + 2;
    return IONCALIB_OK;
}

ioncalib_status ioncalib_protocol_load(const char* path, ioncalib_protocol** out) {
    if (require(path && out, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    return guarded([&] { *out = new ioncalib_protocol{load_protocol(path)}; });
}

void ioncalib_protocol_free(ioncalib_protocol* protocol) { delete protocol; }

ioncalib_status ioncalib_protocol_duration(const ioncalib_protocol* protocol, double* out_ms) {
    if (require(protocol && out_ms, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    *out_ms = protocol->protocol.total_duration_ms();
    return IONCALIB_OK;
}

ioncalib_status ioncalib_protocol_voltage_at(const ioncalib_protocol* protocol, double t_ms, double* out_mV) {
    if (require(protocol && out_mV, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    return guarded([&] { *out_mV = protocol->protocol.voltage_at(t_ms); });
}

ioncalib_status ioncalib_simulate_current(const ioncalib_model* model, const double* params, size_t n_params,
                                          const ioncalib_protocol* protocol, double dt_ms,
                                          ioncalib_trace** out) {
    if (require(model && params && protocol && out, "NULL argument") != IONCALIB_OK)
        return IONCALIB_ERR_CONTRACT;
    return guarded([&] {
        const auto kinetic = static_cast<size_t>(model->spec.n_kinetic_params);
        if (n_params != kinetic + 2)
            throw ContractError("simulate: expected " + std::to_string(kinetic + 2) + " parameters, got " +
                                std::to_string(n_params));
        ParameterVector pv;
        pv.kinetics.assign(params, params + kinetic);
        pv.conductance_nS = params[kinetic];
        pv.reversal_mV = params[kinetic + 1];
        validate_params(model->spec, pv);

        double dt = dt_ms;
        if (dt <= 0.0)
            dt = protocol->protocol.kind() == VoltageProtocol::Kind::Sampled
                     ? protocol->protocol.sample_dt_ms()
                     : 0.1;
        const auto grid = make_time_grid(protocol->protocol.total_duration_ms(), dt);
        *out = new ioncalib_trace{simulate_current(model->spec, pv, protocol->protocol, grid)};
    });
}

ioncalib_status ioncalib_trace_load(const char* path, ioncalib_trace** out) {
    if (require(path && out, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    return guarded([&] { *out = new ioncalib_trace{load_trace(path)}; });
}

ioncalib_status ioncalib_trace_size(const ioncalib_trace* trace, size_t* out) {
    if (require(trace && out, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    *out = trace->trace.size();
    return IONCALIB_OK;
}

ioncalib_status ioncalib_trace_data(const ioncalib_trace* trace, const double** times_ms,
                                    const double** voltages_mV, const double** values) {
    if (require(trace != nullptr, "NULL trace") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    if (times_ms) *times_ms = trace->trace.times_ms.data();
    if (voltages_mV) *voltages_mV = trace->trace.voltages_mV.data();
    if (values) *values = trace->trace.values.data();
    return IONCALIB_OK;
}

ioncalib_status ioncalib_trace_write_csv(const ioncalib_trace* trace, const char* path) {
    if (require(trace && path, "NULL argument") != IONCALIB_OK) return IONCALIB_ERR_CONTRACT;
    return guarded([&] { save_trace(trace->trace, path); });
}

void ioncalib_trace_free(ioncalib_trace* trace) { delete trace; }

ioncalib_status ioncalib_run_generate(const char* config_json, char** out_manifest_json) {
    return run_command(&run_generate, config_json, out_manifest_json);
}
ioncalib_status ioncalib_run_fit(const char* config_json, char** out_manifest_json) {
    return run_command(&run_fit, config_json, out_manifest_json);
}
ioncalib_status ioncalib_run_sample(const char* config_json, char** out_manifest_json) {
    return run_command(&run_sample, config_json, out_manifest_json);
}
ioncalib_status ioncalib_run_predict(const char* config_json, char** out_manifest_json) {
    return run_command(&run_predict, config_json, out_manifest_json);
}
ioncalib_status ioncalib_run_evaluate(const char* config_json, char** out_manifest_json) {
    return run_command(&run_evaluate, config_json, out_manifest_json);
}

void ioncalib_string_free(char* s) { std::free(s); }

}  // extern "C"
