#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace acrostic {

/// Incremental FNV-1a, 64-bit.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffsetBasis = 14695981039346656037ULL;
  static constexpr std::uint64_t kPrime = 1099511628211ULL;

  constexpr Fnv1a64() = default;
  constexpr explicit Fnv1a64(std::uint64_t state) : state_(state) {}

  constexpr Fnv1a64& update(std::uint8_t byte) {
    state_ ^= byte;
    state_ *= kPrime;
    return *this;
  }
  constexpr Fnv1a64& update(std::string_view bytes) {
    for (char c : bytes) update(static_cast<std::uint8_t>(c));
    return *this;
  }
  constexpr Fnv1a64& update(std::span<const std::uint8_t> bytes) {
    for (auto b : bytes) update(b);
    return *this;
  }
  /// Eight bytes, most significant first.
  constexpr Fnv1a64& update_be64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) update(static_cast<std::uint8_t>(v >> shift));
    return *this;
  }

  constexpr std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = kOffsetBasis;
};

constexpr std::uint64_t fnv1a64(std::string_view bytes) { return Fnv1a64{}.update(bytes).digest(); }

}  // namespace acrostic
