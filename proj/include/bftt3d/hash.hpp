#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>
#include <type_traits>

#include <Eigen/Core>

namespace bftt3d {

// FNV-1a 64 over explicit little-endian encodings of the values fed in.
class Fnv1a {
 public:
  void bytes(std::span<const std::uint8_t> data) noexcept {
    for (auto b : data) {
      state_ ^= b;
      state_ *= 0x100000001b3ULL;
    }
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void value(T v) noexcept {
    std::uint64_t bits = 0;
    if constexpr (std::is_floating_point_v<T>) {
      if constexpr (sizeof(T) == 8) {
        bits = std::bit_cast<std::uint64_t>(v);
      } else {
        bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      }
    } else {
      bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      state_ ^= static_cast<std::uint8_t>(bits >> (8 * i));
      state_ *= 0x100000001b3ULL;
    }
  }

  void text(std::string_view s) noexcept {
    value<std::uint64_t>(s.size());
    for (char c : s) value(static_cast<std::uint8_t>(c));
  }

  template <typename Derived>
  void matrix(const Eigen::DenseBase<Derived>& m) noexcept {
    value<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    value<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) value(m(i, j));
    }
  }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace bftt3d
