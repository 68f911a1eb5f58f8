#pragma once

#include <cmath>
#include <cstddef>

#include "doctest.h"
#include "arst/numerics.hpp"
#include "random_matrix.hpp"

namespace arst::test {

template <typename S>
double max_abs_diff(const Matrix<S>& a, const Matrix<S>& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  }
  return m;
}

template <typename S>
void check_close(const Matrix<S>& a, const Matrix<S>& b, double tol) {
  CHECK(max_abs_diff(a, b) <= tol);
}

}  // namespace arst::test
