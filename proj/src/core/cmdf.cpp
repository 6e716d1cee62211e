#include "core/cmdf.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <set>

namespace cinelab {

namespace {

void put_bytes(std::vector<std::uint8_t>& buf, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  buf.insert(buf.end(), b, b + n);
}

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  put_bytes(buf, &v, sizeof(T));  // host is little-endian (x86/arm64)
}

template <typename T>
T get(const std::vector<std::uint8_t>& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size()) throw CmdfError("truncated file");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void cmdf_write(const std::string& path, const std::vector<CmdfTensor>& tensors,
                const std::string& meta_json) {
  std::set<std::string> seen;
  for (const auto& t : tensors)
    if (!seen.insert(t.name).second) throw CmdfError("duplicate tensor name: " + t.name);

  std::vector<std::uint8_t> buf;
  put_bytes(buf, "CMDF", 4);
  put<std::uint32_t>(buf, 1);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xffff) throw CmdfError("tensor name too long: " + t.name);
    if (t.data.size() != t.numel()) throw CmdfError("dims/payload size mismatch: " + t.name);
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(t.name.size()));
    put_bytes(buf, t.name.data(), t.name.size());
    put<std::uint8_t>(buf, 0);  // f32
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint32_t>(buf, d);
    put_bytes(buf, t.data.data(), t.data.size() * sizeof(float));
  }
  std::uint32_t crc = static_cast<std::uint32_t>(crc32(0, buf.data(), static_cast<uInt>(buf.size())));
  put<std::uint32_t>(buf, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CmdfError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CmdfError("write failed: " + path);
  out.close();

  std::ofstream meta(path + ".meta.json", std::ios::trunc);
  if (!meta) throw CmdfError("cannot write sidecar for: " + path);
  meta << meta_json << "\n";
}

std::vector<CmdfTensor> cmdf_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CmdfError("cannot open for reading: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 16) throw CmdfError("truncated file");

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, buf.data(), static_cast<uInt>(buf.size() - 4)));
  if (crc != stored_crc) throw CmdfError("CRC mismatch: " + path);

  std::size_t off = 0;
  char magic[4];
  std::memcpy(magic, buf.data(), 4);
  off = 4;
  if (std::memcmp(magic, "CMDF", 4) != 0) throw CmdfError("bad magic: " + path);
  std::uint32_t version = get<std::uint32_t>(buf, off);
  if (version != 1) throw CmdfError("unsupported version");
  std::uint32_t count = get<std::uint32_t>(buf, off);

  std::vector<CmdfTensor> tensors;
  tensors.reserve(count);
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    CmdfTensor t;
    std::uint16_t name_len = get<std::uint16_t>(buf, off);
    if (off + name_len > buf.size()) throw CmdfError("truncated file");
    t.name.assign(reinterpret_cast<const char*>(buf.data() + off), name_len);
    off += name_len;
    if (!seen.insert(t.name).second) throw CmdfError("duplicate tensor name: " + t.name);
    std::uint8_t dtype = get<std::uint8_t>(buf, off);
    if (dtype != 0) throw CmdfError("unsupported dtype in: " + t.name);
    std::uint8_t ndim = get<std::uint8_t>(buf, off);
    for (int d = 0; d < ndim; ++d) t.dims.push_back(get<std::uint32_t>(buf, off));
    std::size_t n = t.numel();
    if (off + n * sizeof(float) > buf.size() - 4) throw CmdfError("truncated file");
    t.data.resize(n);
    std::memcpy(t.data.data(), buf.data() + off, n * sizeof(float));
    off += n * sizeof(float);
    tensors.push_back(std::move(t));
  }
  if (off != buf.size() - 4) throw CmdfError("trailing bytes before CRC");
  return tensors;
}

}  // namespace cinelab
