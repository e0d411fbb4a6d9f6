#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace exitflow {

/// FNV-1a 64-bit digest; stable across platforms and runs, used for field
/// identity checks and manifest determinism.
struct Fnv1a64 {
  std::uint64_t state = 0xcbf29ce484222325ULL;

  void update(const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 0x100000001b3ULL;
    }
  }
  void update(double v) { update(&v, sizeof(v)); }
  void update(std::span<const double> vs) { update(vs.data(), vs.size() * sizeof(double)); }
  void update(const std::string& s) { update(s.data(), s.size()); }

  std::uint64_t value() const { return state; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = state;
    for (int i = 15; i >= 0; --i) {
      out[i] = digits[v & 0xF];
      v >>= 4;
    }
    return out;
  }
};

inline std::uint64_t fnv1a64(std::span<const double> vs) {
  Fnv1a64 d;
  d.update(vs);
  return d.value();
}

}  // namespace exitflow
