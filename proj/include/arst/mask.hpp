#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace arst {

// Query position t may attend key position s iff t - W <= s <= t.
class BandedCausalMask {
 public:
  BandedCausalMask(std::size_t length, std::size_t width) : length_(length), width_(width) {}

  std::size_t length() const { return length_; }
  std::size_t width() const { return width_; }

  // 1-based positions.
  bool allowed(std::size_t t, std::size_t s) const {
    return s <= t && t <= s + width_ && t >= 1 && s >= 1 && t <= length_ && s <= length_;
  }

  // 0-based positions.
  bool allowed0(std::size_t i, std::size_t j) const { return allowed(i + 1, j + 1); }

  // First 0-based key position visible from 0-based query i.
  std::size_t first_key(std::size_t i) const { return i > width_ ? i - width_ : 0; }

  // All allowed (t, s) pairs, 1-based, row-major.
  std::vector<std::pair<std::size_t, std::size_t>> allowed_pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t t = 1; t <= length_; ++t) {
      for (std::size_t s = 1; s <= t; ++s) {
        if (allowed(t, s)) out.emplace_back(t, s);
      }
    }
    return out;
  }

 private:
  std::size_t length_;
  std::size_t width_;
};

inline BandedCausalMask build_banded_mask(std::size_t length, std::size_t width) {
  return BandedCausalMask(length, width);
}

}  // namespace arst
