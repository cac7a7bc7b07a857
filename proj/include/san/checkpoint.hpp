#pragma once

#include <string>
#include <utility>
#include <vector>

#include "san/tensor.hpp"

namespace san {

// Versioned binary container of named float32 parameters. Little-endian
// on-disk layout, round-trips bit-exactly:
//   magic "SANCKPT1" | u32 count | entries...
//   entry: u32 name_len | name | u32 ndim | u32 dims[ndim] | f32 data[numel]
class Checkpoint {
 public:
  void put(const std::string& name, const Tensor& t);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }

  std::vector<uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<uint8_t>& bytes);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Copies checkpoint values into same-named, same-shaped destination tensors.
void load_named_params(const Checkpoint& ckpt,
                       const std::vector<std::pair<std::string, Tensor*>>& params);

Checkpoint save_named_params(const std::vector<std::pair<std::string, Tensor*>>& params);

}  // namespace san
