#pragma once

#include <string>

#include "model.hpp"
#include "protocol.hpp"

namespace testutil {

// four-state chain C2 <-> C1 <-> O <-> I, six rate pairs
inline const char* kModelBJson = R"({
  "name": "model-b-test",
  "states": ["C2", "C1", "O", "I"],
  "edges": [
    {"from": "C2", "to": "C1", "rate": {"a_index": 0, "b_index": 0, "b_sign": 1}},
    {"from": "C1", "to": "C2", "rate": {"a_index": 1, "b_index": 1, "b_sign": -1}},
    {"from": "C1", "to": "O",  "rate": {"a_index": 2, "b_index": 2, "b_sign": 1}},
    {"from": "O",  "to": "C1", "rate": {"a_index": 3, "b_index": 3, "b_sign": -1}},
    {"from": "O",  "to": "I",  "rate": {"a_index": 4, "b_index": 4, "b_sign": 1}},
    {"from": "I",  "to": "O",  "rate": {"a_index": 5, "b_index": 5, "b_sign": -1}}
  ],
  "open": ["O"]
})";

inline ioncalib::ModelSpec model_b() { return ioncalib::parse_model_spec(kModelBJson); }

inline ioncalib::ParameterVector model_b_params() {
    ioncalib::ParameterVector p;
    p.kinetics = {0.05, 0.02, 0.04, 0.02, 0.08, 0.015, 0.03, 0.02, 0.2, 0.01, 0.01, 0.025};
    p.conductance_nS = 150.0;
    p.reversal_mV = -88.4;
    return p;
}

// C <-> O with k_open = A0 exp(B0 V), k_close = A1 exp(-B1 V)
inline const char* kTwoStateJson = R"({
  "name": "two-state",
  "states": ["C", "O"],
  "edges": [
    {"from": "C", "to": "O", "rate": {"a_index": 0, "b_index": 0, "b_sign": 1}},
    {"from": "O", "to": "C", "rate": {"a_index": 1, "b_index": 1, "b_sign": -1}}
  ],
  "open": ["O"]
})";

inline ioncalib::ModelSpec two_state() { return ioncalib::parse_model_spec(kTwoStateJson); }

inline ioncalib::ParameterVector two_state_params(double a_open, double a_close, double g = 1.0,
                                                  double e_rev = 0.0, double b_open = 0.0,
                                                  double b_close = 0.0) {
    ioncalib::ParameterVector p;
    p.kinetics = {a_open, b_open, a_close, b_close};
    p.conductance_nS = g;
    p.reversal_mV = e_rev;
    return p;
}

inline ioncalib::VoltageProtocol constant_protocol(double duration_ms, double level_mV) {
    return ioncalib::VoltageProtocol::from_steps({{duration_ms, level_mV}});
}

inline std::string repo_path(const std::string& relative) {
    return std::string(IONCALIB_REPO_DIR) + "/" + relative;
}

}  // namespace testutil
