#pragma once

#include <cstdint>
#include <span>

namespace pathchaos {

// Stream tags keep independent uses of the master seed apart.
enum class StreamTag : std::uint64_t {
  brownian = 1,
  initial = 2,
  cloud_brownian = 3,
  cloud_initial = 4,
  resample = 5,
  fuzz = 6,
  jitter = 7,
  sample = 8,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: every draw is a pure function of (key, counter),
// so results never depend on the order in which streams are consumed.
class KeyedStream {
 public:
  explicit KeyedStream(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key_ + counter * 0xd1342543de82ef95ULL);
  }
  // Uniform on (0, 1].
  double uniform(std::uint64_t counter) const {
    return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
  }
  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t counter, std::uint64_t n) const;
  // Standard normals, drawn from counters [2*first_pair, ...).
  void gaussians(std::span<double> out, std::uint64_t first_pair = 0) const;
  double gaussian(std::uint64_t counter) const;

 private:
  std::uint64_t key_;
};

struct RngPolicy {
  std::uint64_t master_seed = 0;

  KeyedStream stream(StreamTag tag, std::uint64_t realization, std::uint64_t particle,
                     std::uint64_t step) const;
};

}  // namespace pathchaos
