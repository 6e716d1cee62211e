#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cinelab {

struct CmdfError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CmdfTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

// CMDF checkpoint container: "CMDF", u32 version=1, u32 tensor count, then per
// tensor {u16 name length, name bytes, u8 dtype (0 = f32), u8 ndim, u32 dims...,
// little-endian f32 payload}, closed by u32 CRC32 over all preceding bytes.
// A JSON sidecar <path>.meta.json carries config hash and creation info.
void cmdf_write(const std::string& path, const std::vector<CmdfTensor>& tensors,
                const std::string& meta_json);
std::vector<CmdfTensor> cmdf_read(const std::string& path);

}  // namespace cinelab
