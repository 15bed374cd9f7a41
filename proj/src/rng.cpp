#include "pathchaos/rng.hpp"

#include <cmath>
#include <numbers>

namespace pathchaos {

std::uint64_t KeyedStream::index(std::uint64_t counter, std::uint64_t n) const {
  const unsigned __int128 wide = static_cast<unsigned __int128>(bits(counter)) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

void KeyedStream::gaussians(std::span<double> out, std::uint64_t first_pair) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::size_t k = 0;
  std::uint64_t pair = first_pair;
  while (k < out.size()) {
    const double u1 = uniform(2 * pair);
    const double u2 = uniform(2 * pair + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    out[k++] = r * std::cos(two_pi * u2);
    if (k < out.size()) out[k++] = r * std::sin(two_pi * u2);
    ++pair;
  }
}

double KeyedStream::gaussian(std::uint64_t counter) const {
  double z = 0.0;
  gaussians(std::span<double>(&z, 1), counter);
  return z;
}

KeyedStream RngPolicy::stream(StreamTag tag, std::uint64_t realization, std::uint64_t particle,
                              std::uint64_t step) const {
  std::uint64_t key = splitmix64(master_seed);
  key = splitmix64(key ^ static_cast<std::uint64_t>(tag));
  key = splitmix64(key ^ realization);
  key = splitmix64(key ^ particle);
  key = splitmix64(key ^ step);
  return KeyedStream(key);
}

}  // namespace pathchaos
