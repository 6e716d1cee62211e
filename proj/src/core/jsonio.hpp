#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace cinelab {

using json = nlohmann::json;

json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);

// Hash of the canonical (sorted-key, compact) dump. Any semantic config change
// changes the hash.
std::uint64_t config_hash(const json& j);
std::string config_hash_hex(const json& j);

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ull);

}  // namespace cinelab
