#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace ioncalib {

std::string slurp_file(const std::string& path, const char* what);
void spit_file(const std::string& path, const std::string& content);

// FNV-1a 64-bit, hex string; used for manifest input/config hashes
std::string fnv1a_hex(const std::string& bytes);
std::string file_hash(const std::string& path);

nlohmann::json load_json(const std::string& path, const char* what);
void save_json(const nlohmann::json& doc, const std::string& path);

}  // namespace ioncalib
