// Sparse per-cell optical flow.
//
// Pipeline: resample frames to a fixed 15 fps clock, run iterative
// Lucas-Kanade independently on every grid cell of each consecutive frame
// pair, then patch non-converged cells by temporal interpolation from the
// same cell in neighboring fields.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "egoflow/errors.hpp"
#include "egoflow/frame.hpp"
#include "egoflow/parallel.hpp"

namespace egoflow {

inline constexpr double kTargetFps = 15.0;

struct FlowField {
  static constexpr int kRows = 32;
  static constexpr int kCols = 32;

  std::vector<float> u;                  // horizontal, pixels/frame, +x right
  std::vector<float> v;                  // vertical, pixels/frame, +y down
  std::vector<std::uint8_t> converged;   // per cell
  int frame_index = 0;                   // index of the earlier frame

  FlowField()
      : u(kRows * kCols, 0.0f),
        v(kRows * kCols, 0.0f),
        converged(kRows * kCols, 0) {}

  static std::size_t cell_index(int row, int col) {
    return static_cast<std::size_t>(row) * kCols + col;
  }
  float& u_at(int row, int col) { return u[cell_index(row, col)]; }
  float u_at(int row, int col) const { return u[cell_index(row, col)]; }
  float& v_at(int row, int col) { return v[cell_index(row, col)]; }
  float v_at(int row, int col) const { return v[cell_index(row, col)]; }
};

struct LkConfig {
  int max_iterations = 20;
  double epsilon = 0.01;           // stop when the update step norm drops below
  double min_eigen_ratio = 1e-6;   // reject cells with lambda_min < ratio * pixels
};

// Resamples a frame sequence onto the 15 fps clock by nearest-timestamp
// selection (ties keep the earlier frame).  Target instants are k/15 for
// k = 0 .. floor(duration * 15); output timestamps are rewritten to k/15.
inline std::vector<Frame> resample_to_15fps(const std::vector<Frame>& frames,
                                            double native_fps) {
  if (frames.empty()) throw EmptyInput("no frames to resample");
  if (!(native_fps > 0.0)) {
    throw InvalidTimestamps("native fps must be positive");
  }
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].source_timestamp > frames[i - 1].source_timestamp)) {
      throw InvalidTimestamps("frame timestamps must be strictly increasing");
    }
  }
  const double duration = frames.back().source_timestamp;
  const long long last_k =
      static_cast<long long>(std::floor(duration * kTargetFps + 1e-9));
  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(last_k) + 1);
  std::size_t j = 0;
  for (long long k = 0; k <= last_k; ++k) {
    const double target = static_cast<double>(k) / kTargetFps;
    while (j + 1 < frames.size() &&
           std::abs(frames[j + 1].source_timestamp - target) <
               std::abs(frames[j].source_timestamp - target)) {
      ++j;
    }
    Frame f = frames[j];
    f.source_timestamp = target;
    out.push_back(std::move(f));
  }
  return out;
}

namespace detail_lk {

inline float sample_bilinear(const Frame& img, double x, double y) {
  const double max_x = img.width - 1.0;
  const double max_y = img.height - 1.0;
  x = x < 0.0 ? 0.0 : (x > max_x ? max_x : x);
  y = y < 0.0 ? 0.0 : (y > max_y ? max_y : y);
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  if (x0 >= img.width - 1) x0 = img.width - 2 >= 0 ? img.width - 2 : 0;
  if (y0 >= img.height - 1) y0 = img.height - 2 >= 0 ? img.height - 2 : 0;
  const int x1 = x0 + 1 < img.width ? x0 + 1 : x0;
  const int y1 = y0 + 1 < img.height ? y0 + 1 : y0;
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return static_cast<float>((1.0 - fy) * top + fy * bot);
}

// Central-difference gradient at an integer pixel, clamped at frame borders.
inline void gradient_at(const Frame& img, int x, int y, double& gx, double& gy) {
  const int xm = x > 0 ? x - 1 : 0;
  const int xp = x < img.width - 1 ? x + 1 : img.width - 1;
  const int ym = y > 0 ? y - 1 : 0;
  const int yp = y < img.height - 1 ? y + 1 : img.height - 1;
  gx = (img.at(xp, y) - img.at(xm, y)) * 0.5;
  gy = (img.at(x, yp) - img.at(x, ym)) * 0.5;
}

}  // namespace detail_lk

// Iterative single-level Lucas-Kanade on every grid cell of one frame pair.
// The structure tensor is built once from the earlier frame's gradients; each
// Gauss-Newton step solves it against the current residual.  A cell fails
// (converged = 0, displacement zeroed) when the tensor's smallest eigenvalue
// is below min_eigen_ratio * pixel count or the iteration cap is reached
// before the step norm drops under epsilon.
inline FlowField lk_cell_flow(const Frame& prev, const Frame& next,
                              const GridGeometry& geometry,
                              const LkConfig& config = {}) {
  if (prev.width != next.width || prev.height != next.height) {
    throw DimensionMismatch("frame pair dimensions differ");
  }
  if (prev.width != geometry.frame_width() ||
      prev.height != geometry.frame_height()) {
    throw DimensionMismatch("grid geometry built for a different frame size");
  }
  if (prev.luma.size() != static_cast<std::size_t>(prev.width) * prev.height ||
      next.luma.size() != static_cast<std::size_t>(next.width) * next.height) {
    throw DimensionMismatch("frame luma buffer does not match dimensions");
  }

  FlowField field;
  for (int row = 0; row < FlowField::kRows; ++row) {
    for (int col = 0; col < FlowField::kCols; ++col) {
      const CellRect& rect = geometry.cell(row, col);
      const int pixels = rect.width * rect.height;

      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      std::vector<double> gxs(static_cast<std::size_t>(pixels));
      std::vector<double> gys(static_cast<std::size_t>(pixels));
      std::size_t p = 0;
      for (int y = rect.top; y < rect.top + rect.height; ++y) {
        for (int x = rect.left; x < rect.left + rect.width; ++x, ++p) {
          double gx, gy;
          detail_lk::gradient_at(prev, x, y, gx, gy);
          gxs[p] = gx;
          gys[p] = gy;
          sxx += gx * gx;
          sxy += gx * gy;
          syy += gy * gy;
        }
      }

      const double trace = sxx + syy;
      const double diff = sxx - syy;
      const double lambda_min =
          0.5 * (trace - std::sqrt(diff * diff + 4.0 * sxy * sxy));
      const std::size_t idx = FlowField::cell_index(row, col);
      if (!(lambda_min >= config.min_eigen_ratio * pixels)) {
        continue;  // converged stays 0, displacement stays (0, 0)
      }

      const double det = sxx * syy - sxy * sxy;
      double u = 0.0, v = 0.0;
      bool ok = false;
      for (int iter = 0; iter < config.max_iterations; ++iter) {
        double bx = 0.0, by = 0.0;
        p = 0;
        for (int y = rect.top; y < rect.top + rect.height; ++y) {
          for (int x = rect.left; x < rect.left + rect.width; ++x, ++p) {
            const double residual =
                prev.at(x, y) - detail_lk::sample_bilinear(next, x + u, y + v);
            bx += gxs[p] * residual;
            by += gys[p] * residual;
          }
        }
        const double du = (syy * bx - sxy * by) / det;
        const double dv = (sxx * by - sxy * bx) / det;
        u += du;
        v += dv;
        if (!std::isfinite(u) || !std::isfinite(v)) break;
        if (std::sqrt(du * du + dv * dv) < config.epsilon) {
          ok = true;
          break;
        }
      }
      if (ok) {
        field.u[idx] = static_cast<float>(u);
        field.v[idx] = static_cast<float>(v);
        field.converged[idx] = 1;
      }
    }
  }
  return field;
}

// Flow fields for every consecutive pair in a resampled sequence;
// fields[i].frame_index == i.  Pairs are processed in parallel.
inline std::vector<FlowField> extract_flow_sequence(const std::vector<Frame>& frames,
                                                    const LkConfig& config = {},
                                                    int threads = 0) {
  if (frames.empty()) throw EmptyInput("no frames for flow extraction");
  if (frames.size() < 2) {
    throw InsufficientFrames("flow extraction needs at least 2 frames");
  }
  const GridGeometry geometry =
      GridGeometry::for_frame(frames[0].width, frames[0].height);
  std::vector<FlowField> fields(frames.size() - 1);
  parallel_for(
      fields.size(),
      [&](std::size_t i, int) {
        fields[i] = lk_cell_flow(frames[i], frames[i + 1], geometry, config);
        fields[i].frame_index = static_cast<int>(i);
      },
      threads);
  return fields;
}

// Replaces non-converged cells by linear interpolation (in field index)
// between the nearest converged samples of the same cell; copies the single
// neighbor at sequence edges and zeroes cells that never converge.  All cells
// are marked converged afterwards.
inline std::vector<FlowField> interpolate_failures(std::vector<FlowField> fields) {
  if (fields.empty()) throw EmptyInput("no flow fields to interpolate");
  const std::size_t n = fields.size();
  const std::size_t cells = static_cast<std::size_t>(FlowField::kRows) * FlowField::kCols;

  std::vector<std::ptrdiff_t> prev_good(n), next_good(n);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::ptrdiff_t last = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (fields[i].converged[cell]) last = static_cast<std::ptrdiff_t>(i);
      prev_good[i] = last;
    }
    std::ptrdiff_t following = -1;
    for (std::size_t i = n; i-- > 0;) {
      if (fields[i].converged[cell]) following = static_cast<std::ptrdiff_t>(i);
      next_good[i] = following;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (fields[i].converged[cell]) continue;
      const std::ptrdiff_t p = prev_good[i];
      const std::ptrdiff_t q = next_good[i];
      float u = 0.0f, v = 0.0f;
      if (p >= 0 && q >= 0) {
        const double alpha = static_cast<double>(i - p) / static_cast<double>(q - p);
        u = static_cast<float>((1.0 - alpha) * fields[p].u[cell] +
                               alpha * fields[q].u[cell]);
        v = static_cast<float>((1.0 - alpha) * fields[p].v[cell] +
                               alpha * fields[q].v[cell]);
      } else if (p >= 0) {
        u = fields[p].u[cell];
        v = fields[p].v[cell];
      } else if (q >= 0) {
        u = fields[q].u[cell];
        v = fields[q].v[cell];
      }
      fields[i].u[cell] = u;
      fields[i].v[cell] = v;
    }
  }
  for (FlowField& f : fields) {
    std::fill(f.converged.begin(), f.converged.end(), std::uint8_t{1});
  }
  return fields;
}

}  // namespace egoflow
