#include "rpflow/rng.hpp"

#include <cmath>

namespace rpflow {

std::uint64_t derive(std::uint64_t key, std::string_view tag) noexcept {
  // FNV-1a over the tag, then mixed into the parent key.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return derive(key, h);
}

double bits_to_unit(std::uint64_t b) noexcept {
  // 53 mantissa bits, offset half a ulp: strictly inside (0,1).
  return (double(b >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::gaussian(std::uint64_t i) const noexcept {
  const double u1 = uniform01(2 * i);
  const double u2 = uniform01(2 * i + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace rpflow
