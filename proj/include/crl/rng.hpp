#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace crl {

// Deterministic counter-based generator (splitmix64 core). Streams are keyed
// by (seed, purpose, index) so that independently drawn substreams never
// depend on scheduling order. Pure integer arithmetic plus a fixed
// uint64 -> double mapping keeps the sequence identical on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t state) : state_(state) {}

  static SeededRng stream(std::uint64_t seed, std::string_view purpose,
                          std::uint64_t index = 0);

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return finalize(state_);
  }

  // [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), n > 0
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  // Sample an index from an (approximately normalized) probability vector.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

inline SeededRng SeededRng::stream(std::uint64_t seed, std::string_view purpose,
                                   std::uint64_t index) {
  // FNV-1a over the purpose tag, then mix the three key parts in sequence.
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const char ch : purpose) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001B3ull;
  }
  std::uint64_t s = finalize(seed + 0x9E3779B97F4A7C15ull);
  s = finalize(s ^ h);
  s = finalize(s ^ index);
  return SeededRng(s);
}

}  // namespace crl
