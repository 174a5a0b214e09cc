#pragma once

#include <cstddef>
#include <vector>

namespace aat {

// Dense row-major matrix of doubles. Deliberately minimal.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return d[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return d[static_cast<std::size_t>(r) * cols + c];
  }
  double* row(int r) { return d.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const {
    return d.data() + static_cast<std::size_t>(r) * cols;
  }
  void zero() { std::fill(d.begin(), d.end(), 0.0); }
};

}  // namespace aat
