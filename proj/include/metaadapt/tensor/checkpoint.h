#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "metaadapt/tensor/tensor.h"

namespace metaadapt {

// Binary checkpoint, version 1. All integers and floats little-endian.
//
//   magic    8 bytes  "MADCKPT\0"
//   version  u32      1
//   count    u64      number of entries, written in name order
//   entry:
//     name_len u32, name bytes (UTF-8, no terminator)
//     rank     u32, dims u64[rank]
//     payload  f64[product(dims)]
inline constexpr std::uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const std::filesystem::path& path, const ParamMap& params);
ParamMap LoadCheckpoint(const std::filesystem::path& path);

// FNV-1a over names, shapes and raw value bytes, in name order.
std::uint64_t Checksum(const ParamMap& params);
std::string ChecksumHex(std::uint64_t checksum);

}  // namespace metaadapt
