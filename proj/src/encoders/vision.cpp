#include "icar/encoders/vision.hpp"

#include "icar/error.hpp"

#include <algorithm>
#include <cmath>

namespace icar::enc {

void VisionEncoderConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
    throw ContractError("vision: patch_size " + std::to_string(patch_size) + " must divide image_size " +
                        std::to_string(image_size));
  }
  if (depth <= 0) throw ContractError("vision: depth must be positive");
  if (heads <= 0 || width <= 0 || width % heads != 0) {
    throw ContractError("vision: width " + std::to_string(width) + " must be a multiple of heads " +
                        std::to_string(heads));
  }
  if (embed_dim <= 0 || mlp_ratio <= 0) throw ContractError("vision: embed_dim and mlp_ratio must be positive");
  if (exit_layers.empty() || exit_layers.back() != depth) {
    throw ContractError("vision: exit_layers must end with the final layer " + std::to_string(depth));
  }
  for (std::size_t i = 0; i < exit_layers.size(); ++i) {
    if (exit_layers[i] < 1 || exit_layers[i] > depth || (i > 0 && exit_layers[i] <= exit_layers[i - 1])) {
      throw ContractError("vision: exit_layers must be strictly ascending within [1, depth]");
    }
  }
}

bool VisionEncoderConfig::is_exit(int layer) const {
  return std::find(exit_layers.begin(), exit_layers.end(), layer) != exit_layers.end();
}

MiniViT::MiniViT(VisionEncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(derive_seed(config_.seed, "vision-init"));
  const Index d = config_.width;
  const Index patch_dim = 3 * config_.patch_size * config_.patch_size;
  patch_embed_ = Linear(patch_dim, d, rng);
  patch_embed_.weight.data() *= 2.0;
  class_token_ = normal_tensor({1, d}, 0.02, rng);
  positions_ = normal_tensor({config_.patches() + 1, d}, 0.02, rng);
  for (int l = 0; l < config_.depth; ++l) blocks_.emplace_back(d, config_.heads, config_.mlp_ratio, rng);
  final_norm_ = LayerNormParams(d);
  projection_ = Linear(d, config_.embed_dim, rng, false);
}

Matrix patchify(std::span<const Tensor* const> images, int patch_size) {
  if (images.empty()) throw ContractError("patchify: empty image batch");
  const Index s = images.front()->dim(1);
  const Index g = s / patch_size;
  const Index p = patch_size;
  Matrix out(static_cast<Index>(images.size()) * g * g, 3 * p * p);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Tensor& im = *images[b];
    if (im.ndim() != 3 || im.dim(0) != 3 || im.dim(1) != s || im.dim(2) != s) {
      throw DimensionError("patchify: image " + std::to_string(b) + " has shape " + shape_string(im.shape()));
    }
    for (Index gy = 0; gy < g; ++gy)
      for (Index gx = 0; gx < g; ++gx) {
        const Index row = static_cast<Index>(b) * g * g + gy * g + gx;
        for (Index c = 0; c < 3; ++c)
          for (Index y = 0; y < p; ++y)
            for (Index x = 0; x < p; ++x)
              out(row, (c * p + y) * p + x) = im[(c * s + gy * p + y) * s + gx * p + x] - 0.5;
      }
  }
  return out;
}

Var MiniViT::embed(Tape& tape, std::span<const Tensor* const> images) const {
  if (images.front()->dim(1) != config_.image_size) {
    throw DimensionError("vision encoder expects " + std::to_string(config_.image_size) + "px images, got " +
                         shape_string(images.front()->shape()));
  }
  const Index batch = static_cast<Index>(images.size());
  const Index n = config_.patches();
  const Var patches = patch_embed_(tape, tape.constant(patchify(images, config_.patch_size)));
  // Row 0 of the concatenation is the class token; sequence b is [cls, patches of b].
  const Var stacked = concat_rows({tape.parameter(class_token_), patches});
  std::vector<Index> order, pos;
  order.reserve(batch * (n + 1));
  pos.reserve(batch * (n + 1));
  for (Index b = 0; b < batch; ++b) {
    order.push_back(0);
    pos.push_back(0);
    for (Index i = 0; i < n; ++i) {
      order.push_back(1 + b * n + i);
      pos.push_back(1 + i);
    }
  }
  return add(gather_rows(stacked, std::move(order)), gather_rows(tape.parameter(positions_), std::move(pos)));
}

Var MiniViT::exit_embedding(Tape& tape, const Var& tokens, Index batch) const {
  std::vector<Index> cls(batch);
  for (Index b = 0; b < batch; ++b) cls[b] = b * (config_.patches() + 1);
  const Var pooled = final_norm_(tape, gather_rows(tokens, std::move(cls)));
  return l2_normalize_rows(projection_(tape, pooled));
}

std::vector<Var> MiniViT::forward(Tape& tape, std::span<const Tensor* const> images, std::span<const int> exits,
                                  CostCounter* counter) const {
  if (exits.empty()) throw ContractError("vision forward: no exit requested");
  for (int e : exits) {
    if (!config_.is_exit(e)) throw ContractError("vision forward: layer " + std::to_string(e) + " is not an exit layer");
  }
  const Index batch = static_cast<Index>(images.size());
  const int deepest = *std::max_element(exits.begin(), exits.end());
  const std::vector<Index> segments(batch, config_.patches() + 1);
  std::vector<Var> out(exits.size());
  Var x = embed(tape, images);
  if (counter) counter->images += batch;
  for (int layer = 1; layer <= deepest; ++layer) {
    x = blocks_[layer - 1](tape, x, segments, counter);
    Var emb;
    for (std::size_t i = 0; i < exits.size(); ++i) {
      if (exits[i] != layer) continue;
      if (!emb.valid()) emb = exit_embedding(tape, x, batch);
      out[i] = emb;
    }
  }
  return out;
}

std::vector<NamedTensor> MiniViT::parameters() {
  std::vector<NamedTensor> out;
  patch_embed_.collect("vision.patch_embed", out);
  out.push_back({"vision.class_token", &class_token_});
  out.push_back({"vision.positions", &positions_});
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].collect("vision.block" + std::to_string(l), out);
  final_norm_.collect("vision.final_norm", out);
  projection_.collect("vision.proj", out);
  return out;
}

std::vector<ConstNamedTensor> MiniViT::parameters() const {
  std::vector<ConstNamedTensor> out;
  for (const auto& [name, t] : const_cast<MiniViT*>(this)->parameters()) out.push_back({name, t});
  return out;
}

bool MiniViT::is_head_parameter(const std::string& name) { return name.rfind("vision.proj", 0) == 0; }

Matrix encode_images_at_exit(const MiniViT& model, std::span<const Tensor* const> images, int exit_layer,
                             CostCounter* counter, std::size_t batch_size) {
  Matrix out(static_cast<Index>(images.size()), model.config().embed_dim);
  const int exits[] = {exit_layer};
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const auto chunk = images.subspan(start, std::min(batch_size, images.size() - start));
    Tape tape;
    out.middleRows(static_cast<Index>(start), static_cast<Index>(chunk.size())) =
        model.forward(tape, chunk, exits, counter).front().value();
  }
  return out;
}

Vector encode_image_at_exit(const MiniViT& model, const Tensor& image, int exit_layer, CostCounter* counter) {
  const Tensor* one[] = {&image};
  return encode_images_at_exit(model, one, exit_layer, counter).row(0).transpose();
}

Vector encode_image_full(const MiniViT& model, const Tensor& image, CostCounter* counter) {
  return encode_image_at_exit(model, image, model.config().depth, counter);
}

}  // namespace icar::enc
