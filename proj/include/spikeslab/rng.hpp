#pragma once

// Counter-based random number generation (Philox4x32-10).  Counter-based
// generators give reproducible, splittable streams: a (seed, stream) pair
// identifies an independent sequence regardless of how many draws other
// streams have consumed, which is what makes parallel experiments
// deterministic for any worker count.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace spikeslab {

namespace detail {

// splitmix64 finalizer, used to derive child seeds/streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Derives an unrelated seed from (seed, a, b); used to give independent
// randomness to sub-tasks (repetitions, rows, chains) of a seeded run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0) {
  std::uint64_t h = detail::mix64(seed ^ detail::mix64(a));
  return detail::mix64(h ^ detail::mix64(b ^ 0x6A09E667F3BCC908ULL));
}

// Philox4x32-10 block cipher over a 128-bit counter with a 64-bit key.
class Philox4x32 {
 public:
  static constexpr std::uint32_t kMult0 = 0xD2511F53u;
  static constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static void block(const std::uint32_t ctr_in[4], std::uint64_t key,
                    std::uint32_t out[4]) {
    std::uint32_t c0 = ctr_in[0], c1 = ctr_in[1], c2 = ctr_in[2], c3 = ctr_in[3];
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k0 += kWeyl0;
        k1 += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMult0) * c0;
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMult1) * c2;
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n1 = lo1;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      const std::uint32_t n3 = lo0;
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
  }
};

// One random stream: (seed, stream_id) select the sequence, an internal
// counter advances through it.  Value semantics; copying forks the state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_(stream_id), counter_(0), buffer_pos_(4),
        have_cached_normal_(false), cached_normal_(0.0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Independent stream for sub-task `index`; does not disturb this stream.
  RngStream child(std::uint64_t index) const {
    return RngStream(derive_seed(seed_, stream_, 0xC2B2AE3D27D4EB4FULL),
                     derive_seed(stream_ ^ seed_, index, 0x165667B19E3779F9ULL));
  }

  std::uint32_t next_u32() {
    if (buffer_pos_ >= 4) refill();
    return buffer_[buffer_pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to pass to log().
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(a);
    have_cached_normal_ = true;
    return r * std::cos(a);
  }

  // Exponential with unit rate.
  double exponential() { return -std::log(uniform_pos()); }

 private:
  void refill() {
    std::uint32_t ctr[4];
    ctr[0] = static_cast<std::uint32_t>(counter_);
    ctr[1] = static_cast<std::uint32_t>(counter_ >> 32);
    ctr[2] = static_cast<std::uint32_t>(stream_);
    ctr[3] = static_cast<std::uint32_t>(stream_ >> 32);
    Philox4x32::block(ctr, seed_, buffer_);
    ++counter_;
    buffer_pos_ = 0;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
  std::uint32_t buffer_[4];
  int buffer_pos_;
  bool have_cached_normal_;
  double cached_normal_;
};

}  // namespace spikeslab
