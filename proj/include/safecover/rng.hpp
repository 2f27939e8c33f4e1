#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace safecover {

// Counter-based random stream: output i of stream (seed, label) is a pure
// function of (seed, label, i). Streams can be split freely and never share
// state, which keeps runs reproducible no matter how work is scheduled.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, std::string_view label) : key_(mix(seed ^ fnv1a(label))) {}

  // Derive an independent child stream, e.g. per agent or per round.
  RngStream child(std::string_view label, std::uint64_t index = 0) const {
    RngStream s;
    s.key_ = mix(key_ ^ fnv1a(label) ^ mix(index + 0x9e3779b97f4a7c15ULL));
    return s;
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // 128-bit multiply avoids modulo bias.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; implementation-defined std distributions
  // are avoided so streams are stable across standard libraries.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  // splitmix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace safecover
