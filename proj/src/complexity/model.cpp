#include "icar/complexity/model.hpp"

#include "icar/error.hpp"
#include "icar/io/checkpoint.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace icar::complexity {

std::string_view head_name(HeadType h) { return h == HeadType::kRegression ? "regression" : "binary"; }

HeadType parse_head(std::string_view name) {
  if (name == "regression") return HeadType::kRegression;
  if (name == "binary") return HeadType::kBinary;
  throw ContractError("unknown complexity head '" + std::string(name) + "' (expected regression|binary)");
}

void ComplexityModelConfig::validate() const {
  if (image_size <= 0 || image_size % 8 != 0) {
    throw ContractError("complexity model image_size must be a positive multiple of 8, got " +
                        std::to_string(image_size));
  }
  for (Index w : widths)
    if (w <= 0) throw ContractError("complexity model widths must be positive");
  if (hidden <= 0) throw ContractError("complexity model hidden width must be positive");
}

ComplexityModel::ComplexityModel(ComplexityModelConfig config) : config_(config) {
  config_.validate();
  Rng rng(derive_seed(config_.seed, "complexity-init"));
  Index cin = 3;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const Index cout = config_.widths[i];
    stages_[i].conv_weight = normal_tensor({9 * cin, cout}, std::sqrt(2.0 / static_cast<double>(9 * cin)), rng);
    stages_[i].conv_bias = Tensor({1, cout}, true);
    stages_[i].norm = LayerNormParams(cout);
    cin = cout;
  }
  const Index side = config_.image_size / 8;
  const Index flat = side * side * cin;
  if (config_.head == HeadType::kRegression) {
    fc1_ = Linear(flat, 1, rng);
    fc1_.weight.data().setZero();
  } else {
    fc1_ = Linear(flat, config_.hidden, rng);
    fc2_ = Linear(config_.hidden, 2, rng);
  }
}

Matrix to_pixel_rows(std::span<const Tensor* const> images) {
  if (images.empty()) throw ContractError("empty image batch");
  const Index s = images.front()->dim(1);
  const Index plane = s * s;
  Matrix out(static_cast<Index>(images.size()) * plane, 3);
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Tensor& im = *images[b];
    if (im.ndim() != 3 || im.dim(0) != 3 || im.dim(1) != s || im.dim(2) != s) {
      throw DimensionError("image " + std::to_string(b) + " has shape " + shape_string(im.shape()) +
                           ", batch expects 3x" + std::to_string(s) + "x" + std::to_string(s));
    }
    for (Index c = 0; c < 3; ++c)
      out.block(static_cast<Index>(b) * plane, c, plane, 1) = im.data().segment(c * plane, plane).array() - 0.5;
  }
  return out;
}

Var ComplexityModel::logits(Tape& tape, std::span<const Tensor* const> images) const {
  const Index batch = static_cast<Index>(images.size());
  if (images.front()->dim(1) != config_.image_size) {
    throw DimensionError("complexity model expects " + std::to_string(config_.image_size) + "px images, got " +
                         shape_string(images.front()->shape()));
  }
  Var x = tape.constant(to_pixel_rows(images));
  Index side = config_.image_size;
  for (const Stage& st : stages_) {
    x = conv3x3(x, tape.parameter(st.conv_weight), batch, side, side);
    x = add_bias(x, tape.parameter(st.conv_bias));
    x = gelu(st.norm(tape, x));
    x = avg_pool2x2(x, batch, side, side);
    side /= 2;
  }
  x = reshape(x, batch, side * side * x.cols());
  if (config_.head == HeadType::kRegression) return fc1_(tape, x);
  return fc2_(tape, gelu(fc1_(tape, x)));
}

Vector ComplexityModel::scores_from_logits(const Matrix& logits, HeadType head) {
  Vector s(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) {
    // sigmoid(z) for regression; softmax complex probability = sigmoid(z1 - z0) for binary.
    const double z = head == HeadType::kRegression ? logits(i, 0) : logits(i, 1) - logits(i, 0);
    s[i] = std::clamp(1.0 / (1.0 + std::exp(-z)), 0.0, 1.0);
  }
  return s;
}

std::vector<NamedTensor> ComplexityModel::parameters() {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const std::string p = "stage" + std::to_string(i);
    out.push_back({p + ".conv.weight", &stages_[i].conv_weight});
    out.push_back({p + ".conv.bias", &stages_[i].conv_bias});
    stages_[i].norm.collect(p + ".norm", out);
  }
  fc1_.collect("head.fc1", out);
  if (config_.head == HeadType::kBinary) fc2_.collect("head.fc2", out);
  return out;
}

std::vector<ConstNamedTensor> ComplexityModel::parameters() const {
  std::vector<ConstNamedTensor> out;
  for (const auto& [name, t] : const_cast<ComplexityModel*>(this)->parameters()) out.push_back({name, t});
  return out;
}

void ComplexityModel::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json meta;
  meta["head"] = head_name(config_.head);
  meta["image_size"] = config_.image_size;
  meta["widths"] = config_.widths;
  meta["hidden"] = config_.hidden;
  meta["seed"] = config_.seed;
  io::save_checkpoint(path, "complexity", meta.dump(), parameters());
}

ComplexityModel ComplexityModel::load(const std::filesystem::path& path) {
  const io::Checkpoint ckpt = io::load_checkpoint(path);
  if (ckpt.kind != "complexity") {
    throw LoadError("checkpoint " + path.string() + " holds a '" + ckpt.kind + "' model, expected complexity");
  }
  ComplexityModelConfig cfg;
  try {
    const auto meta = nlohmann::json::parse(ckpt.metadata);
    cfg.head = parse_head(meta.at("head").get<std::string>());
    cfg.image_size = meta.at("image_size").get<int>();
    cfg.widths = meta.at("widths").get<std::array<Index, 3>>();
    cfg.hidden = meta.at("hidden").get<Index>();
    cfg.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const std::exception& e) {
    throw LoadError("checkpoint " + path.string() + " has invalid metadata: " + e.what());
  }
  ComplexityModel model(cfg);
  io::restore(ckpt, model.parameters());
  return model;
}

double predict_score(const ComplexityModel& model, const Tensor& image) {
  if (model.head() != HeadType::kRegression) throw ContractError("predict_score requires a regression head");
  const Tensor* batch[] = {&image};
  return score_images(model, batch).front();
}

RoutingDecision make_decision(std::uint64_t sample_id, double score, double threshold) {
  return {sample_id, score < threshold, score, threshold};
}

RoutingDecision classify(const ComplexityModel& model, const Tensor& image, double threshold,
                         std::uint64_t sample_id) {
  if (model.head() != HeadType::kBinary) throw ContractError("classify requires a binary head");
  const Tensor* batch[] = {&image};
  return make_decision(sample_id, score_images(model, batch).front(), threshold);
}

std::vector<double> score_images(const ComplexityModel& model, std::span<const Tensor* const> images,
                                 std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const auto chunk = images.subspan(start, std::min(batch_size, images.size() - start));
    Tape tape;
    const Vector s = ComplexityModel::scores_from_logits(model.logits(tape, chunk).value(), model.head());
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

}  // namespace icar::complexity
