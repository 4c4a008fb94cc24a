#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gdca/models.hpp"

namespace gdca {

// Binary layout, all integers little-endian:
//   "GDCA" | u32 version (1) | u64 extractor seed | u32 tensor count
//   per tensor: u16 name length | name bytes | u8 ndim | u32 dims[ndim] | f32 data
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NamedTensors<float> tensors;
  std::uint64_t extractor_seed = 0;
};

// ContractError for duplicate, empty, over-long or non-UTF-8 names.
std::string encode_checkpoint(const NamedTensors<float>& tensors, std::uint64_t extractor_seed);
// FormatError (magic, malformed entries), VersionError, LengthError (truncation).
Checkpoint decode_checkpoint(std::string_view bytes);

// Written to a sibling temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors<float>& tensors,
                     std::uint64_t extractor_seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gdca
