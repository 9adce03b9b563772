#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tbs/model.hpp"

// Checkpoint layout, all integers little-endian:
//
//   "TBSC"                magic
//   u32                   format version
//   u32                   entry count
//   per entry:
//     u32 + bytes         name length and name
//     u32                 rank
//     u64 x rank          extents
//     f32 x numel         payload
//   u32                   CRC-32 of all payload bytes, in entry order
namespace tbs {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
    std::string name;
    Tensor<float> value;
};

void write_checkpoint(std::ostream& os, const std::vector<CheckpointEntry>& entries);
// Throws CheckpointError on bad magic, truncation or CRC mismatch.
std::vector<CheckpointEntry> read_checkpoint(std::istream& is);

void save_model(const std::filesystem::path& path, const ModelParams<float>& params);
// Entries must match the model layout by name and shape.
ModelParams<float> load_model(const std::filesystem::path& path);

std::vector<CheckpointEntry> model_entries(const ModelParams<float>& params);
ModelParams<float> model_from_entries(const std::vector<CheckpointEntry>& entries);

}  // namespace tbs
