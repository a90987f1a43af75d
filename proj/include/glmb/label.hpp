#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace glmb {

/// Track identity: (birth time, index within that birth time). Ordered lexicographically.
struct Label {
  std::uint32_t birth_time = 0;
  std::uint32_t index = 1;

  friend constexpr auto operator<=>(const Label&, const Label&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Label& l) {
  return os << '(' << l.birth_time << ',' << l.index << ')';
}

}  // namespace glmb

template <>
struct std::hash<glmb::Label> {
  std::size_t operator()(const glmb::Label& l) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{l.birth_time} << 32) | l.index);
  }
};
