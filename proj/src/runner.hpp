#pragma once

#include <string>

#include "json.hpp"

namespace ioncalib {

// Workflow entry points behind the C API: each takes the effective config
// (flags already merged over any config file by the caller), writes its
// outputs plus a manifest into config["out"], and returns the manifest.
// Missing "seed" falls back to the ION_CALIB_SEED environment variable,
// then to 1.
nlohmann::json run_generate(const nlohmann::json& config);
nlohmann::json run_fit(const nlohmann::json& config);
nlohmann::json run_sample(const nlohmann::json& config);
nlohmann::json run_predict(const nlohmann::json& config);
nlohmann::json run_evaluate(const nlohmann::json& config);

const char* tool_version();

}  // namespace ioncalib
