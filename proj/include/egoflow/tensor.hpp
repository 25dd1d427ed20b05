// Dense rank-3 tensor in (row, col, depth) order with depth varying fastest.
// All network math runs in double; file formats store float32.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "egoflow/errors.hpp"

namespace egoflow {

struct Dims3 {
  int rows = 0;
  int cols = 0;
  int depth = 0;

  bool operator==(const Dims3&) const = default;

  std::size_t count() const {
    return static_cast<std::size_t>(rows) * cols * depth;
  }

  std::string str() const {
    return std::to_string(rows) + "x" + std::to_string(cols) + "x" +
           std::to_string(depth);
  }
};

struct Tensor3 {
  Dims3 dims;
  std::vector<double> values;

  Tensor3() = default;
  Tensor3(int rows, int cols, int depth)
      : dims{rows, cols, depth}, values(checked_count(dims), 0.0) {}
  explicit Tensor3(const Dims3& d) : Tensor3(d.rows, d.cols, d.depth) {}

  std::size_t index(int r, int c, int d) const {
    return (static_cast<std::size_t>(r) * dims.cols + c) * dims.depth + d;
  }

  double& at(int r, int c, int d) { return values[index(r, c, d)]; }
  double at(int r, int c, int d) const { return values[index(r, c, d)]; }

  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  std::size_t size() const { return values.size(); }

  bool operator==(const Tensor3&) const = default;

 private:
  // Validates before the values vector is sized, so negative dims surface as
  // a shape error instead of a huge allocation request.
  static std::size_t checked_count(const Dims3& d) {
    if (d.rows <= 0 || d.cols <= 0 || d.depth <= 0) {
      throw ShapeError("tensor dimensions must be positive, got " + d.str());
    }
    return d.count();
  }
};

}  // namespace egoflow
