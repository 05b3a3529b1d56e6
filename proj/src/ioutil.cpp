#include "ioutil.hpp"

#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace ioncalib {

std::string slurp_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string(what) + " not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out << content;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string file_hash(const std::string& path) { return fnv1a_hex(slurp_file(path, "input")); }

nlohmann::json load_json(const std::string& path, const char* what) {
    try {
        return nlohmann::json::parse(slurp_file(path, what));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string(what) + " " + path + ": " + e.what());
    }
}

void save_json(const nlohmann::json& doc, const std::string& path) {
    spit_file(path, doc.dump(2) + "\n");
}

}  // namespace ioncalib
