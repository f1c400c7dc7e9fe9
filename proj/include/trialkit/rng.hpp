#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace trialkit {

// Philox4x32-10 counter-based generator.  Draw i of stream s in replicate r is
// a pure function of (seed, r, s, i), so replicates are independent and the
// execution order never affects the numbers.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint32_t replicate, std::uint32_t stream)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        replicate_(replicate),
        stream_(stream) {}

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::uint32_t k0, std::uint32_t k1) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = 0xD2511F53ULL * ctr[0];
      const std::uint64_t p1 = 0xCD9E8D57ULL * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
             static_cast<std::uint32_t>(p0)};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return ctr;
  }

  // Uniform draw in [0,1) for counter index i (53-bit mantissa).
  double uniform(std::uint64_t i) const {
    const auto out = block({static_cast<std::uint32_t>(i),
                            static_cast<std::uint32_t>(i >> 32), stream_, replicate_},
                           key0_, key1_);
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  // Exponential with the given rate; uses -log(1-u) so u = 0 is safe.
  double exponential(std::uint64_t i, double rate) const {
    return -std::log1p(-uniform(i)) / rate;
  }

 private:
  std::uint32_t key0_, key1_, replicate_, stream_;
};

// Sequential view over one (replicate, stream) pair.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t replicate, std::uint32_t stream)
      : gen_(seed, replicate, stream) {}

  double uniform() { return gen_.uniform(next_++); }
  double exponential(double rate) { return gen_.exponential(next_++, rate); }

 private:
  Philox gen_;
  std::uint64_t next_ = 0;
};

}  // namespace trialkit
