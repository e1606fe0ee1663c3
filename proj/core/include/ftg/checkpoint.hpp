#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftg/embedding.hpp"

namespace ftg {

// FTGKGE1 container layout:
//   8 bytes   magic "FTGKGE1\n"
//   4 bytes   little-endian u32 L
//   L bytes   UTF-8 JSON metadata
//   ...       float32 little-endian matrix sections, row-major, back to back
inline constexpr std::string_view kCheckpointMagic{"FTGKGE1\n", 8};

std::vector<unsigned char> encode_container(const nlohmann::ordered_json& metadata,
                                            std::span<const std::span<const float>> sections);

struct DecodedContainer {
  nlohmann::ordered_json metadata;
  std::size_t payload_offset = 0;
  std::vector<unsigned char> bytes;
};

// Validates magic and metadata framing only; section sizes are checked by
// read_sections once the caller knows the expected shapes.
DecodedContainer decode_container(std::vector<unsigned char> bytes);

// Splits the payload into sections of the given float counts. Throws
// CheckpointError::Truncated (expected vs actual total bytes) when short and
// DimensionMismatch when bytes are left over.
std::vector<std::vector<float>> read_sections(const DecodedContainer& c,
                                              std::span<const std::size_t> counts);

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);
std::vector<unsigned char> read_file(const std::filesystem::path& path);

void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_checkpoint(const std::filesystem::path& path);

std::vector<unsigned char> encode_checkpoint(const EmbeddingModel& model);
EmbeddingModel decode_checkpoint(std::vector<unsigned char> bytes);

}  // namespace ftg
