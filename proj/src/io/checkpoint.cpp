#include "icar/io/checkpoint.hpp"

#include "icar/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace icar::io {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'A', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  template <typename T>
  T get_le() {
    unsigned char bytes[sizeof(T)];
    read(bytes, sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
  }

  std::string get_string() {
    const auto n = get_le<std::uint32_t>();
    if (n > (1u << 26)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated");
  }

  [[noreturn]] void fail(const std::string& why) const { throw LoadError("checkpoint " + name_ + ": " + why); }

 private:
  std::istream& in_;
  std::string name_;
};

}  // namespace

const Tensor& Checkpoint::at(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw LoadError("checkpoint has no tensor named " + name);
}

void save_checkpoint(const std::filesystem::path& path, const std::string& kind, const std::string& metadata,
                     std::span<const ConstNamedTensor> tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, Checkpoint::kFormatVersion);
  put_string(out, kind);
  put_string(out, metadata);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_string(out, name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t->ndim()));
    for (Index d : t->shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (Index i = 0; i < t->numel(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>((*t)[i]));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("checkpoint missing: " + path.string());
  Reader r(in, path.string());
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("bad magic");
  if (const auto v = r.get_le<std::uint32_t>(); v != Checkpoint::kFormatVersion) {
    r.fail("unsupported format version " + std::to_string(v));
  }
  Checkpoint ckpt;
  ckpt.kind = r.get_string();
  ckpt.metadata = r.get_string();
  const auto count = r.get_le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const auto ndim = r.get_le<std::uint32_t>();
    if (ndim == 0 || ndim > 8) r.fail("tensor " + name + " has " + std::to_string(ndim) + " dimensions");
    std::vector<Index> shape;
    Index numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto dim = r.get_le<std::uint64_t>();
      if (dim == 0 || dim > (1u << 28)) r.fail("tensor " + name + " has an invalid dimension");
      shape.push_back(static_cast<Index>(dim));
      numel *= static_cast<Index>(dim);
    }
    Vector data(numel);
    for (Index k = 0; k < numel; ++k) data[k] = std::bit_cast<double>(r.get_le<std::uint64_t>());
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, std::span<const NamedTensor> into) {
  for (const auto& [name, t] : into) {
    const Tensor& src = ckpt.at(name);
    if (src.shape() != t->shape()) {
      throw LoadError("checkpoint tensor " + name + " has shape " + shape_string(src.shape()) + ", model expects " +
                      shape_string(t->shape()));
    }
    t->data() = src.data();
  }
}

}  // namespace icar::io
