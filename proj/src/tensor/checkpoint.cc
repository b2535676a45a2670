#include "metaadapt/tensor/checkpoint.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "metaadapt/core/error.h"

namespace metaadapt {
namespace {

constexpr std::array<char, 8> kMagic = {'M', 'A', 'D', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void WriteLe(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T ReadLe(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  Require(static_cast<bool>(in), ErrorKind::kIo, "truncated checkpoint " + path.string());
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void Fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& path, const ParamMap& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorKind::kIo, "cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  WriteLe<std::uint32_t>(out, kCheckpointVersion);
  WriteLe<std::uint64_t>(out, params.size());
  for (const auto& [name, tensor] : params) {
    WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) WriteLe<std::uint64_t>(out, d);
    for (double v : tensor.data()) WriteLe<double>(out, v);
  }
  Require(static_cast<bool>(out), ErrorKind::kIo, "failed writing checkpoint " + path.string());
}

ParamMap LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kIo, "cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  Require(static_cast<bool>(in) && magic == kMagic, ErrorKind::kDataIntegrity,
          "not a checkpoint file: " + path.string());
  const auto version = ReadLe<std::uint32_t>(in, path);
  Require(version == kCheckpointVersion, ErrorKind::kDataIntegrity,
          "unsupported checkpoint version " + std::to_string(version));
  const auto count = ReadLe<std::uint64_t>(in, path);
  ParamMap params;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = ReadLe<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    Require(static_cast<bool>(in), ErrorKind::kIo, "truncated checkpoint " + path.string());
    const auto rank = ReadLe<std::uint32_t>(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(ReadLe<std::uint64_t>(in, path));
    std::vector<double> data(NumElements(shape));
    for (double& v : data) v = ReadLe<double>(in, path);
    params.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

std::uint64_t Checksum(const ParamMap& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, tensor] : params) {
    Fnv(h, name.data(), name.size());
    for (std::size_t d : tensor.shape()) {
      const std::uint64_t d64 = d;
      Fnv(h, &d64, sizeof d64);
    }
    Fnv(h, tensor.data().data(), tensor.size() * sizeof(double));
  }
  return h;
}

std::string ChecksumHex(std::uint64_t checksum) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(checksum));
  return buf;
}

}  // namespace metaadapt
