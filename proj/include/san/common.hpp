#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace san {

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

// FNV-1a over a byte range, used for seed derivation and content hashing.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable per-stage seed derivation: every randomized stage pulls its seed
// from the master seed and a stage name.
inline uint64_t derive_seed(uint64_t master, const std::string& stage) {
  return splitmix64(master ^ fnv1a64(stage.data(), stage.size()));
}

inline uint64_t derive_seed(uint64_t master, const std::string& stage, uint64_t salt) {
  return splitmix64(derive_seed(master, stage) ^ splitmix64(salt + 0x9e3779b97f4a7c15ULL));
}

}  // namespace san
