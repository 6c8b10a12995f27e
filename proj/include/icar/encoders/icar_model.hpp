#pragma once

#include "icar/encoders/text.hpp"
#include "icar/encoders/vision.hpp"

#include <filesystem>

namespace icar::enc {

// The retrieval model: vision and text towers sharing one embedding space.
struct IcarModel {
  MiniViT vision;
  TextEncoder text;

  IcarModel(VisionEncoderConfig vcfg, TextEncoderConfig tcfg);

  std::vector<NamedTensor> parameters();
  std::vector<ConstNamedTensor> parameters() const;

  void save(const std::filesystem::path& path) const;
  static IcarModel load(const std::filesystem::path& path);
};

}  // namespace icar::enc
