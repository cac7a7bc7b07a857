#include "san/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace san {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'N', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32(const std::vector<uint8_t>& in, size_t& pos) {
  check(pos + 4 <= in.size(), "checkpoint: truncated file");
  uint32_t v = static_cast<uint32_t>(in[pos]) | (static_cast<uint32_t>(in[pos + 1]) << 8) |
               (static_cast<uint32_t>(in[pos + 2]) << 16) |
               (static_cast<uint32_t>(in[pos + 3]) << 24);
  pos += 4;
  return v;
}

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& t) {
  for (auto& e : entries_) {
    check(e.first != name, "checkpoint: duplicate parameter name '" + name + "'");
  }
  entries_.emplace_back(name, t.clone());
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw std::runtime_error("checkpoint: no parameter named '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  for (auto& e : entries_) out.push_back(e.first);
  return out;
}

std::vector<uint8_t> Checkpoint::serialize() const {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u32(out, static_cast<uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<uint32_t>(t.ndim()));
    for (int d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
    static_assert(sizeof(float) == 4);
    const size_t bytes = static_cast<size_t>(t.numel()) * 4;
    const size_t off = out.size();
    out.resize(off + bytes);
    // mainstream targets are little-endian; the format is defined as such
    std::memcpy(out.data() + off, t.data().data(), bytes);
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<uint8_t>& bytes) {
  check(bytes.size() >= 12 && std::memcmp(bytes.data(), kMagic, 8) == 0,
        "checkpoint: bad magic (not a SANCKPT1 file)");
  size_t pos = 8;
  const uint32_t count = get_u32(bytes, pos);
  Checkpoint ck;
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = get_u32(bytes, pos);
    check(pos + name_len <= bytes.size(), "checkpoint: truncated name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    const uint32_t ndim = get_u32(bytes, pos);
    check(ndim <= 8, "checkpoint: implausible ndim");
    std::vector<int> shape;
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<int>(get_u32(bytes, pos)));
      numel *= shape.back();
    }
    const size_t nbytes = static_cast<size_t>(numel) * 4;
    check(pos + nbytes <= bytes.size(), "checkpoint: truncated data for '" + name + "'");
    std::vector<float> values(static_cast<size_t>(numel));
    std::memcpy(values.data(), bytes.data() + pos, nbytes);
    pos += nbytes;
    ck.entries_.emplace_back(name, Tensor::from_values(shape, std::move(values)));
  }
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  const auto bytes = serialize();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    check(f.good(), "checkpoint: cannot open '" + tmp + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    check(f.good(), "checkpoint: write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "checkpoint: cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void load_named_params(const Checkpoint& ckpt,
                       const std::vector<std::pair<std::string, Tensor*>>& params) {
  for (const auto& [name, t] : params) {
    const Tensor& src = ckpt.get(name);
    check(src.shape() == t->shape(), "checkpoint: shape mismatch for '" + name + "': file " +
                                         src.shape_str() + " vs model " + t->shape_str());
    auto dst = t->mutable_data();
    auto sv = src.data();
    std::copy(sv.begin(), sv.end(), dst.begin());
  }
}

Checkpoint save_named_params(const std::vector<std::pair<std::string, Tensor*>>& params) {
  Checkpoint ck;
  for (const auto& [name, t] : params) ck.put(name, *t);
  return ck;
}

}  // namespace san
