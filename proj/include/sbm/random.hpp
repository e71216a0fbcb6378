#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace sbm {

// Philox4x32-10 counter-based generator (Salmon et al. 2011).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter ctr, Key key);
};

// Deterministic stream of variates for one (seed, stream, substream)
// triple. Counter words: block index, substream, stream low, stream high.
// Usable as a UniformRandomBitGenerator.
class RandomSource {
 public:
  using result_type = std::uint32_t;
  RandomSource(std::uint64_t seed, std::uint64_t stream, std::uint32_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  double uniform();      // (0, 1), 53-bit
  double normal();       // standard normal, Box-Muller
  double exponential();  // rate 1

 private:
  void refill();
  Philox4x32::Key key_;
  Philox4x32::Counter ctr_;
  Philox4x32::Counter buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0;
};

}  // namespace sbm
