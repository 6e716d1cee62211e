#include "core/jsonio.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cinelab {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open json file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed json in " + path + ": " + e.what());
  }
  return j;
}

void save_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write json file: " + path);
  out << j.dump(2) << "\n";
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t config_hash(const json& j) {
  // nlohmann::json object keys are sorted, so dump() is canonical.
  std::string s = j.dump();
  return fnv1a(s.data(), s.size());
}

std::string config_hash_hex(const json& j) {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << config_hash(j);
  return os.str();
}

}  // namespace cinelab
