/* ion-calib public C API: opaque handles plus error codes over the C++ core.
 * All functions returning ioncalib_status set a thread-local message
 * retrievable via ioncalib_last_error() on failure. */
#ifndef IONCALIB_H
#define IONCALIB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IONCALIB_API __declspec(dllexport)
#else
#define IONCALIB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ioncalib_status {
    IONCALIB_OK = 0,
    IONCALIB_ERR_IO = 1,
    IONCALIB_ERR_PARSE = 2,
    IONCALIB_ERR_VALIDATION = 3,
    IONCALIB_ERR_NUMERIC = 4,
    IONCALIB_ERR_CONTRACT = 5,
    IONCALIB_ERR_UNKNOWN = 6
} ioncalib_status;

typedef struct ioncalib_model ioncalib_model;
typedef struct ioncalib_protocol ioncalib_protocol;
typedef struct ioncalib_trace ioncalib_trace;

IONCALIB_API const char* ioncalib_version(void);
IONCALIB_API const char* ioncalib_last_error(void);

/* ---- model handles ---- */
IONCALIB_API ioncalib_status ioncalib_model_load(const char* path, ioncalib_model** out);
IONCALIB_API void ioncalib_model_free(ioncalib_model* model);
IONCALIB_API ioncalib_status ioncalib_model_name(const ioncalib_model* model, const char** out);
IONCALIB_API ioncalib_status ioncalib_model_state_count(const ioncalib_model* model, size_t* out);
/* kinetic parameter count + 2 slots (conductance, reversal) */
IONCALIB_API ioncalib_status ioncalib_model_param_count(const ioncalib_model* model, size_t* out);

/* ---- protocol handles ---- */
IONCALIB_API ioncalib_status ioncalib_protocol_load(const char* path, ioncalib_protocol** out);
IONCALIB_API void ioncalib_protocol_free(ioncalib_protocol* protocol);
IONCALIB_API ioncalib_status ioncalib_protocol_duration(const ioncalib_protocol* protocol, double* out_ms);
IONCALIB_API ioncalib_status ioncalib_protocol_voltage_at(const ioncalib_protocol* protocol, double t_ms,
                                                          double* out_mV);

/* ---- simulation ----
 * params: kinetics pairs (A_1, B_1, ..., A_K, B_K) then conductance (nS) and
 * reversal potential (mV); n_params = 2K + 2. dt_ms <= 0 selects the default
 * output grid (0.1 ms for step protocols, the sample grid otherwise). */
IONCALIB_API ioncalib_status ioncalib_simulate_current(const ioncalib_model* model, const double* params,
                                                       size_t n_params, const ioncalib_protocol* protocol,
                                                       double dt_ms, ioncalib_trace** out);

IONCALIB_API ioncalib_status ioncalib_trace_load(const char* path, ioncalib_trace** out);
IONCALIB_API ioncalib_status ioncalib_trace_size(const ioncalib_trace* trace, size_t* out);
IONCALIB_API ioncalib_status ioncalib_trace_data(const ioncalib_trace* trace, const double** times_ms,
                                                 const double** voltages_mV, const double** values);
IONCALIB_API ioncalib_status ioncalib_trace_write_csv(const ioncalib_trace* trace, const char* path);
IONCALIB_API void ioncalib_trace_free(ioncalib_trace* trace);

/* ---- workflow commands ----
 * config_json carries the same keys the ion-calib CLI assembles from flags;
 * outputs and a manifest land in config["out"]. When out_manifest_json is
 * non-NULL it receives a malloc'd copy of the manifest (free with
 * ioncalib_string_free). */
IONCALIB_API ioncalib_status ioncalib_run_generate(const char* config_json, char** out_manifest_json);
IONCALIB_API ioncalib_status ioncalib_run_fit(const char* config_json, char** out_manifest_json);
IONCALIB_API ioncalib_status ioncalib_run_sample(const char* config_json, char** out_manifest_json);
IONCALIB_API ioncalib_status ioncalib_run_predict(const char* config_json, char** out_manifest_json);
IONCALIB_API ioncalib_status ioncalib_run_evaluate(const char* config_json, char** out_manifest_json);

IONCALIB_API void ioncalib_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* IONCALIB_H */
