#pragma once

// Counter-based random streams (Philox4x32-10, Salmon et al., SC'11).
//
// A stream is addressed by a 64-bit key and two 32-bit stream coordinates, so
// replicate r of cell c can be regenerated without touching any other stream.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace ewoc {

using Philox4x32Block = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

constexpr void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(product);
  hi = static_cast<std::uint32_t>(product >> 32);
}

}  // namespace detail

/// The ten-round Philox 4x32 bijection.
constexpr Philox4x32Block philox4x32(Philox4x32Block ctr, Philox4x32Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0 = 0, hi0 = 0, lo1 = 0, hi1 = 0;
    detail::mulhilo(detail::kPhiloxM0, ctr[0], lo0, hi0);
    detail::mulhilo(detail::kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

/// A reproducible random stream. Satisfies UniformRandomBitGenerator (32-bit).
///
/// Counter layout: words 0-1 are the draw index within the stream, words 2-3
/// are the stream coordinates (e.g. cell index, replicate index).
class Stream {
 public:
  using result_type = std::uint32_t;

  Stream() = default;
  Stream(std::uint64_t seed, std::uint32_t stream_a, std::uint32_t stream_b = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_a_(stream_a),
        stream_b_(stream_b) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 4) refill();
    return block_[lane_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    return (hi << 32) | lo;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    double u = 0.0;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  /// Number of 128-bit blocks consumed so far.
  std::uint64_t blocks_used() const noexcept { return counter_; }

 private:
  void refill() {
    block_ = philox4x32({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                         stream_a_, stream_b_},
                        key_);
    ++counter_;
    lane_ = 0;
  }

  Philox4x32Key key_{0, 0};
  std::uint32_t stream_a_ = 0;
  std::uint32_t stream_b_ = 0;
  std::uint64_t counter_ = 0;
  Philox4x32Block block_{};
  int lane_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ewoc
