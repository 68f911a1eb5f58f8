#pragma once

#include <string>
#include <vector>

#include "arst/numerics.hpp"

namespace arst {

// One video: T x d_feat frame features and the 1-based phase id of each frame.
struct Video {
  std::string id;
  Matrix<float> features;
  std::vector<int> labels;

  std::size_t frames() const { return labels.size(); }
};

}  // namespace arst
