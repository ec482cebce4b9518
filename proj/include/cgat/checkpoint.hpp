#pragma once

#include <cstdint>
#include <filesystem>

#include "cgat/autodiff.hpp"

namespace cgat::diff {

struct CheckpointHeader {
  std::uint32_t d = 0;
  std::uint32_t users = 0;
  std::uint32_t entities = 0;
  std::uint32_t relations = 0;  // embedding rows, inverse and self relations included

  friend bool operator==(const CheckpointHeader&, const CheckpointHeader&) = default;
};

// "CGCK", u32 version, header fields as u32, u32 parameter count, then per
// parameter: u32 name length, name bytes, u32 rows, u32 cols, f64 values.
// Little-endian throughout.
void save_checkpoint(const ParamRegistry& registry, const CheckpointHeader& header,
                     const std::filesystem::path& path);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

// Loads values into an already-built registry; names, shapes and the header
// must match exactly.
void load_checkpoint(const std::filesystem::path& path, const CheckpointHeader& expected,
                     ParamRegistry& registry);

}  // namespace cgat::diff
