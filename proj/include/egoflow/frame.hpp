// Grayscale video frames and the fixed 32x32 cell grid laid over them.
#pragma once

#include <vector>

#include "egoflow/errors.hpp"

namespace egoflow {

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> luma;  // row-major, [0, 1]
  double source_timestamp = 0.0;

  float at(int x, int y) const {
    return luma[static_cast<std::size_t>(y) * width + x];
  }
  float& at(int x, int y) {
    return luma[static_cast<std::size_t>(y) * width + x];
  }
};

inline Frame make_frame(int width, int height, double timestamp = 0.0) {
  if (width <= 0 || height <= 0) {
    throw DimensionMismatch("frame dimensions must be positive");
  }
  Frame f;
  f.width = width;
  f.height = height;
  f.luma.assign(static_cast<std::size_t>(width) * height, 0.0f);
  f.source_timestamp = timestamp;
  return f;
}

struct CellRect {
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
};

// Partition of a frame into 32x32 cells.  Cell (row, col) covers pixel rows
// [floor(row*H/32), floor((row+1)*H/32)) and the analogous column range, so
// cells tile the frame exactly even when 32 does not divide the dimensions.
class GridGeometry {
 public:
  static constexpr int kRows = 32;
  static constexpr int kCols = 32;

  static GridGeometry for_frame(int frame_width, int frame_height) {
    if (frame_width < kCols || frame_height < kRows) {
      throw DimensionMismatch("frame " + std::to_string(frame_width) + "x" +
                              std::to_string(frame_height) +
                              " is smaller than the 32x32 grid");
    }
    GridGeometry g;
    g.frame_width_ = frame_width;
    g.frame_height_ = frame_height;
    g.cells_.resize(static_cast<std::size_t>(kRows) * kCols);
    for (int r = 0; r < kRows; ++r) {
      const int top = static_cast<int>(static_cast<long long>(r) * frame_height / kRows);
      const int bottom =
          static_cast<int>(static_cast<long long>(r + 1) * frame_height / kRows);
      for (int c = 0; c < kCols; ++c) {
        const int left = static_cast<int>(static_cast<long long>(c) * frame_width / kCols);
        const int right =
            static_cast<int>(static_cast<long long>(c + 1) * frame_width / kCols);
        g.cells_[static_cast<std::size_t>(r) * kCols + c] =
            CellRect{left, top, right - left, bottom - top};
      }
    }
    return g;
  }

  const CellRect& cell(int row, int col) const {
    return cells_[static_cast<std::size_t>(row) * kCols + col];
  }
  int frame_width() const { return frame_width_; }
  int frame_height() const { return frame_height_; }

 private:
  int frame_width_ = 0;
  int frame_height_ = 0;
  std::vector<CellRect> cells_;
};

}  // namespace egoflow
