#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "jepa_fer/tensor.hpp"

namespace jepa_fer {

/// Named f32 tensors in the VJFC container:
///   "VJFC" | u32 version=1 | u32 count |
///   count x { u16 name_len | name | u8 dtype(0=f32) | u8 rank | u32 dims[rank] | f32 values }
/// all little-endian. Names are namespaced ("encoder.block0.attn.wq.weight").
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void add(std::string name, const Tensor& tensor);
  bool contains(const std::string& name) const;
  /// Throws FormatError when absent.
  const Tensor& get(const std::string& name) const;
  /// Copies the stored values into `dst` after checking shapes.
  void load_into(const std::string& name, Tensor& dst) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  /// FNV-1a over the serialized bytes; equal iff the files would be equal.
  std::uint64_t checksum() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace jepa_fer
