#pragma once

#include <compare>
#include <cstdint>
#include <vector>

namespace bbwm {

using Token = std::uint32_t;
using TokenSeq = std::vector<Token>;
using Key = std::uint64_t;

struct Seed {
  std::uint64_t value = 0;
  friend auto operator<=>(const Seed&, const Seed&) = default;
};

}  // namespace bbwm
