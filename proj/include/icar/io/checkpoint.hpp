#pragma once

#include "icar/numerics/tensor.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace icar::io {

// Versioned binary container shared by every model checkpoint.
//
//   magic "ICARCKPT" | u32 format version | u32 len + kind | u32 len + JSON metadata
//   | u32 tensor count | per tensor: u32 len + name, u32 ndim, u64 dims[ndim],
//   f64 data[numel]
//
// All integers and floats are little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string kind;      // e.g. "complexity", "icar"
  std::string metadata;  // JSON text describing the model configuration
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& at(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const std::string& metadata,
                     std::span<const ConstNamedTensor> tensors);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies values into `into` by name; every name must be present with an identical shape.
void restore(const Checkpoint& ckpt, std::span<const NamedTensor> into);

}  // namespace icar::io
