#include "icar/encoders/icar_model.hpp"

#include "icar/error.hpp"
#include "icar/io/checkpoint.hpp"
#include "json.hpp"

namespace icar::enc {

IcarModel::IcarModel(VisionEncoderConfig vcfg, TextEncoderConfig tcfg)
    : vision(std::move(vcfg)), text(std::move(tcfg)) {
  if (vision.config().embed_dim != text.config().embed_dim) {
    throw ContractError("vision embed_dim " + std::to_string(vision.config().embed_dim) +
                        " differs from text embed_dim " + std::to_string(text.config().embed_dim));
  }
}

std::vector<NamedTensor> IcarModel::parameters() {
  auto out = vision.parameters();
  for (auto& p : text.parameters()) out.push_back(p);
  return out;
}

std::vector<ConstNamedTensor> IcarModel::parameters() const {
  auto out = vision.parameters();
  for (auto& p : text.parameters()) out.push_back(p);
  return out;
}

void IcarModel::save(const std::filesystem::path& path) const {
  const auto& v = vision.config();
  const auto& t = text.config();
  nlohmann::ordered_json meta;
  meta["vision"] = {{"image_size", v.image_size}, {"patch_size", v.patch_size}, {"depth", v.depth},
                    {"exit_layers", v.exit_layers}, {"width", v.width},           {"heads", v.heads},
                    {"embed_dim", v.embed_dim},     {"mlp_ratio", v.mlp_ratio},   {"seed", v.seed}};
  meta["text"] = {{"vocab_size", t.vocab_size}, {"width", t.width},         {"heads", t.heads},
                  {"depth", t.depth},           {"max_len", t.max_len},     {"embed_dim", t.embed_dim},
                  {"mlp_ratio", t.mlp_ratio},   {"seed", t.seed}};
  io::save_checkpoint(path, "icar", meta.dump(), parameters());
}

IcarModel IcarModel::load(const std::filesystem::path& path) {
  const io::Checkpoint ckpt = io::load_checkpoint(path);
  if (ckpt.kind != "icar") {
    throw LoadError("checkpoint " + path.string() + " holds a '" + ckpt.kind + "' model, expected icar");
  }
  VisionEncoderConfig v;
  TextEncoderConfig t;
  try {
    const auto meta = nlohmann::json::parse(ckpt.metadata);
    const auto& mv = meta.at("vision");
    v.image_size = mv.at("image_size");
    v.patch_size = mv.at("patch_size");
    v.depth = mv.at("depth");
    v.exit_layers = mv.at("exit_layers").get<std::vector<int>>();
    v.width = mv.at("width");
    v.heads = mv.at("heads");
    v.embed_dim = mv.at("embed_dim");
    v.mlp_ratio = mv.at("mlp_ratio");
    v.seed = mv.at("seed");
    const auto& mt = meta.at("text");
    t.vocab_size = mt.at("vocab_size");
    t.width = mt.at("width");
    t.heads = mt.at("heads");
    t.depth = mt.at("depth");
    t.max_len = mt.at("max_len");
    t.embed_dim = mt.at("embed_dim");
    t.mlp_ratio = mt.at("mlp_ratio");
    t.seed = mt.at("seed");
  } catch (const std::exception& e) {
    throw LoadError("checkpoint " + path.string() + " has invalid metadata: " + e.what());
  }
  IcarModel model(v, t);
  io::restore(ckpt, model.parameters());
  return model;
}

}  // namespace icar::enc
