#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>

namespace stochreg {

// Philox4x32-10 (Salmon et al., Random123). Counter-based: output block k is a
// pure function of (key, counter), so any element of a stream is addressable
// in O(1) and the bit stream is identical on every platform.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept;

// A keyed stream of 128-bit blocks. The counter word layout is
// (block_lo, block_hi, stream_lo, stream_hi) and the key is the seed.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  PhiloxCounter block(std::uint64_t index) const noexcept;
  // The k-th 64-bit word: half (k % 2) of block k / 2.
  std::uint64_t word(std::uint64_t k) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  PhiloxKey key_;
};

// Uniform indices in {0, ..., n-1}; element k maps word k through Lemire's
// multiply-shift. 1-based labels are these plus one.
class IndexStream {
 public:
  IndexStream(std::uint64_t seed, std::uint64_t stream, std::size_t n);

  std::size_t operator[](std::uint64_t k) const noexcept {
    const unsigned __int128 prod = static_cast<unsigned __int128>(words_.word(k)) * n_;
    return static_cast<std::size_t>(prod >> 64);
  }
  std::size_t n() const noexcept { return n_; }

 private:
  CounterStream words_;
  std::uint64_t n_;
};

// Standard normal variate number k of the stream (Box-Muller on block k).
double standard_normal(const CounterStream& s, std::uint64_t k) noexcept;

// Mixes a base seed with a list of tags (splitmix64 chain). Used to derive
// independent keys for noise and per-cell run streams.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept;

}  // namespace stochreg
