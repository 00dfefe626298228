#include "jepa_fer/checkpoint.hpp"

#include <algorithm>

#include "jepa_fer/error.hpp"
#include "jepa_fer/io.hpp"

namespace jepa_fer {

namespace {
constexpr std::string_view kMagic = "VJFC";
constexpr std::uint8_t kDtypeF32 = 0;
}  // namespace

void Checkpoint::add(std::string name, const Tensor& tensor) {
  if (name.empty() || name.size() > 0xffff) throw UsageError("checkpoint: invalid tensor name");
  if (contains(name)) throw UsageError("checkpoint: duplicate tensor name '" + name + "'");
  entries_.emplace_back(std::move(name), tensor.detach());
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint: missing tensor '" + name + "'");
}

void Checkpoint::load_into(const std::string& name, Tensor& dst) const {
  const auto& src = get(name);
  if (src.shape() != dst.shape()) {
    throw DimensionError("checkpoint: tensor '" + name + "' has shape " + shape_str(src.shape()) +
                         ", model expects " + shape_str(dst.shape()));
  }
  std::copy(src.values().begin(), src.values().end(), dst.mutable_values().begin());
}

std::string Checkpoint::serialize() const {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(kDtypeF32);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (auto v : t.values()) w.f32(v);
  }
  return w.take();
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  io::ByteReader r(std::span<const char>(bytes.data(), bytes.size()));
  if (r.bytes(4) != kMagic) throw FormatError("checkpoint: bad magic at byte offset 0");
  const auto version = r.u32();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                      " at byte offset 4");
  }
  const auto count = r.u32();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.u16();
    std::string name(r.bytes(len));
    const auto dtype_at = r.offset();
    if (r.u8() != kDtypeF32) {
      throw FormatError("checkpoint: unsupported dtype at byte offset " + std::to_string(dtype_at));
    }
    const auto rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    const auto values_at = r.offset();
    const std::size_t n = shape_numel(shape);
    if (rank == 0 || n == 0) {
      throw FormatError("checkpoint: empty tensor '" + name + "' at byte offset " +
                        std::to_string(values_at));
    }
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32();
    ckpt.add(std::move(name), Tensor::from_values(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) {
    throw FormatError("checkpoint: trailing bytes at offset " + std::to_string(r.offset()));
  }
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const { io::atomic_write(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

std::uint64_t Checkpoint::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace jepa_fer
