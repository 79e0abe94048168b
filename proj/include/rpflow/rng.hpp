#pragma once
// Counter-based random streams. Every draw is a pure function of
// (key, index): ensemble realizations, matrix entries, grid intervals and
// bridge refinements each get an independent stream derived from the master
// seed, so paths can be re-materialized lazily in any order and runs are
// reproducible under any parallel schedule.
#include <cstdint>
#include <string_view>

namespace rpflow {

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Fold one word / one tag into a parent key.
constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t word) noexcept {
  return mix64(key ^ mix64(word ^ 0x5851f42d4c957f2dull));
}
std::uint64_t derive(std::uint64_t key, std::string_view tag) noexcept;

double bits_to_unit(std::uint64_t b) noexcept;  // (0,1), 53-bit mantissa

// Indexed stream: draw i is independent of draw j for i != j and of every
// draw of any stream with a different key.
class Stream {
 public:
  Stream() = default;
  explicit Stream(std::uint64_t key) : key_(key) {}
  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t bits(std::uint64_t i) const noexcept { return mix64(key_ ^ mix64(i)); }
  double uniform01(std::uint64_t i) const noexcept { return bits_to_unit(bits(i)); }
  // Standard normal via Box-Muller; consumes uniform indices 2i and 2i+1.
  // Do not mix gaussian() and uniform01() on one stream.
  double gaussian(std::uint64_t i) const noexcept;

 private:
  std::uint64_t key_ = 0;
};

}  // namespace rpflow
