#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ntp {

// Deterministic 64-bit mixer, used for deriving per-episode / per-instance
// seeds from a master seed without correlation between streams.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream, uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ 0x5851f42d4c957f2dull) + splitmix64(stream * 0x9e3779b97f4a7c15ull + index));
}

// mt19937_64 with hand-rolled draw helpers. The standard distributions are
// not bit-portable across library implementations, so every draw below is
// defined directly on the raw 64-bit output.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free modulo is fine at our scales;
  // use multiply-shift to avoid modulo bias.
  uint64_t uniform_index(uint64_t n) {
    return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(uniform_index(static_cast<uint64_t>(hi - lo + 1)));
  }

  double normal() {
    // Box-Muller on portable uniforms.
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  bool operator==(const Rng& o) const { return engine_ == o.engine_; }

 private:
  std::mt19937_64 engine_;
};

// SHA-1 digest as a lowercase hex string. Used for config fingerprints and
// git-style content hashes of checkpoints in reports.
std::string sha1_hex(const std::string& bytes);

// Git blob-style content hash: sha1("blob <len>\0" + bytes).
std::string git_blob_hash(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace ntp
