#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace dpls {

/// Counter-based generator: Philox4x32 with 10 rounds (Salmon et al., SC'11).
///
/// The 64-bit seed is the Philox key. The 128-bit counter is split into a
/// 64-bit block index (low half) and a 64-bit stream id (high half), so
/// independent sub-streams are obtained with derive() without sharing state.
/// Every transformation from raw words to doubles is written out here rather
/// than delegated to <random> distributions, whose output is
/// implementation-defined; the raw stream is bit-identical on all platforms.
class SeededRng {
 public:
  static constexpr std::string_view kAlgorithm = "philox4x32-10";

  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Independent generator on a sub-stream keyed by `id`. Pure: does not
  /// advance this generator.
  SeededRng derive(std::uint64_t id) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double normal();
  /// Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// One Philox4x32-10 block. Exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace dpls
