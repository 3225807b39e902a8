#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace granular {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
// the output block is a pure function of (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept;
};

// Domain separation tags. Each consumer of randomness owns one tag so that
// streams never overlap across subsystems.
enum class StreamTag : std::uint8_t {
  Generic = 0,
  FirmStructure = 1,
  SubunitShock = 2,
  Aggregation = 3,
  Bootstrap = 4,
  Experiment = 5,
  Sampler = 6,
};

// A reproducible random stream addressed by (seed, tag, major, minor).
//
// Counter layout: word 0 = block index, word 1 = minor, word 2 = low 32 bits
// of major, word 3 = high 24 bits of major | tag << 24. The key is the 64-bit
// master seed. A stream therefore yields up to 2^32 blocks (2^33 doubles)
// before it would wrap, and any (tag, major, minor) triple maps to a disjoint
// substream. Typical use: major = firm index, minor = period.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, StreamTag tag, std::uint64_t major = 0,
               std::uint32_t minor = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  // Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform() noexcept;

  // Standard normal by Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;

  // Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  void refill() noexcept;

  Philox4x32::Key key_{};
  Philox4x32::Counter counter_{};
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace granular
