#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "s2h/kv_config.hpp"
#include "s2h/model.hpp"

namespace s2h {

// Binary checkpoint, little-endian throughout:
//   "S2HCKPT\0", u32 version, u64 length + config text (key = value lines),
//   u64 tensor count, then per tensor: u32 name length, name, u32 rank,
//   u64 dims[rank], f64 data (column-major).
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  KvConfig config;
  std::map<std::string, Matrix> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// The config holds the pipeline configuration plus any `extra` keys.
void save_pipeline(const std::filesystem::path& path, const PipelineConfig& cfg, const PipelineParams& params,
                   const KvConfig& extra = {});
// Rebuilds the parameter structure from the stored configuration and fills
// every tensor; missing, surplus or mis-shaped tensors are ShapeMismatch.
struct LoadedPipeline {
  PipelineConfig config;
  PipelineParams params;
  KvConfig raw_config;
};
LoadedPipeline load_pipeline(const std::filesystem::path& path);

}  // namespace s2h
