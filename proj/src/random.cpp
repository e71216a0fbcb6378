#include "sbm/random.hpp"

#include <cmath>
#include <numbers>

namespace sbm {

namespace {

constexpr std::uint32_t M0 = 0xD2511F53, M1 = 0xCD9E8D57;
constexpr std::uint32_t W0 = 0x9E3779B9, W1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(M0, c[0], hi0, lo0);
    mulhilo(M1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t stream, std::uint32_t substream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr_{0, substream, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

void RandomSource::refill() {
  buf_ = Philox4x32::block(ctr_, key_);
  ++ctr_[0];
  pos_ = 0;
}

RandomSource::result_type RandomSource::operator()() {
  if (pos_ == 4) refill();
  return buf_[pos_++];
}

double RandomSource::uniform() {
  const std::uint64_t a = (*this)() >> 5, b = (*this)() >> 6;  // 27 + 26 bits
  return (static_cast<double>((a << 26) | b) + 0.5) * 0x1p-53;
}

double RandomSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2 * std::log(uniform()));
  const double th = 2 * std::numbers::pi * uniform();
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

double RandomSource::exponential() { return -std::log(uniform()); }

}  // namespace sbm
