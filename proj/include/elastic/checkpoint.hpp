#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "elastic/network.hpp"

namespace elastic {

// Container layout, all integers little-endian:
//   "ELNET1\0\0"            8 bytes
//   version                 u32 (= 1)
//   manifest length         u64
//   manifest                UTF-8 JSON
//   payload length          u64
//   payload                 f32 values of every tensor, manifest order
//   crc32(payload)          u32

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(ElasticNetwork& net);
ElasticNetwork deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(ElasticNetwork& net, const std::filesystem::path& path);
ElasticNetwork load_checkpoint(const std::filesystem::path& path);

/// Manifest text of a checkpoint file, for inspection.
std::string checkpoint_manifest(const std::vector<std::uint8_t>& bytes);

/// zlib CRC-32 over every stored parameter, in parameters() order.
std::uint32_t parameter_checksum(ElasticNetwork& net, bool backbone_only = false);

}  // namespace elastic
