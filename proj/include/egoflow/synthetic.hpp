// Synthetic data: analytic flow volumes for six motion classes (for training
// and evaluation without real video) and textured frame pairs with known
// displacement (ground truth for the optical-flow front end).
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "egoflow/errors.hpp"
#include "egoflow/frame.hpp"
#include "egoflow/rng.hpp"
#include "egoflow/volume.hpp"

namespace egoflow {

enum class MotionKind {
  translate,      // constant (u, v) everywhere
  rotate_z,       // rotation about the view axis
  radial_zoom,    // expansion away from the grid center
  vertical_bob,   // vertical motion whose sign flips every 7 fields
  static_noise,   // zero motion, noise only
  mixed_window,   // still center box, radial flow at the border
};

struct MotionClassSpec {
  std::string name;
  MotionKind kind = MotionKind::translate;
  double amplitude = 1.0;   // pixels/frame; per-cell-offset factor for
                            // rotate_z and radial_zoom
  double dir_u = 1.0;       // translate direction
  double dir_v = 0.0;
  double noise_sigma = 0.0; // i.i.d. Gaussian noise added to every entry
  std::uint64_t seed = 0;
};

namespace detail_synth {

inline constexpr double kGridCenter = (FlowVolume::kRows - 1) / 2.0;  // 15.5

// Analytic flow at cell (row, col) for field tau of block t, noise-free.
inline void analytic_flow(const MotionClassSpec& spec, int tau, int row, int col,
                          double& u, double& v) {
  const double y = row - kGridCenter;  // + down
  const double x = col - kGridCenter;  // + right
  switch (spec.kind) {
    case MotionKind::translate:
      u = spec.amplitude * spec.dir_u;
      v = spec.amplitude * spec.dir_v;
      break;
    case MotionKind::rotate_z:
      // Clockwise rotation in image coordinates: u = -w*y, v = +w*x.
      u = -spec.amplitude * y;
      v = spec.amplitude * x;
      break;
    case MotionKind::radial_zoom:
      u = spec.amplitude * x;
      v = spec.amplitude * y;
      break;
    case MotionKind::vertical_bob: {
      const int phase = (tau / 7) % 2;
      u = 0.0;
      v = (phase == 0 ? 1.0 : -1.0) * spec.amplitude;
      break;
    }
    case MotionKind::static_noise:
      u = 0.0;
      v = 0.0;
      break;
    case MotionKind::mixed_window: {
      const double box = std::max(std::fabs(x), std::fabs(y));
      if (box <= 8.0) {
        u = 0.0;
        v = 0.0;
      } else {
        u = spec.amplitude * x / kGridCenter;
        v = spec.amplitude * y / kGridCenter;
      }
      break;
    }
  }
}

}  // namespace detail_synth

// Deterministic volume t of a motion class: analytic flow per cell plus
// Gaussian noise drawn from a stream keyed by (spec.seed, t).  The volume is
// labeled -1 (callers tag class ids) and starts at frame 30 * t.
inline FlowVolume generate_volume(const MotionClassSpec& spec, int t) {
  if (t < 0) throw IndexError("volume index must be non-negative");
  FlowVolume volume;
  volume.start_frame = t * kBlockStride;
  Rng rng(spec.seed, static_cast<std::uint64_t>(t));
  for (int tau = 0; tau < kBlockFields; ++tau) {
    for (int r = 0; r < FlowVolume::kRows; ++r) {
      for (int c = 0; c < FlowVolume::kCols; ++c) {
        double u, v;
        detail_synth::analytic_flow(spec, tau, r, c, u, v);
        if (spec.noise_sigma > 0.0) {
          u += spec.noise_sigma * rng.normal();
          v += spec.noise_sigma * rng.normal();
        }
        volume.at(r, c, 2 * tau) = static_cast<float>(u);
        volume.at(r, c, 2 * tau + 1) = static_cast<float>(v);
      }
    }
  }
  return volume;
}

// The six standard motion classes.  noise_ratio scales each class's noise
// sigma relative to its typical flow magnitude: the raw amplitude for the
// uniform-motion classes, amplitude x 10 (the mean cell offset) for the
// rotational ones, and the translate amplitude for the static class so it is
// not exactly zero everywhere.
inline std::vector<MotionClassSpec> default_motion_classes(
    double noise_ratio = 0.2, std::uint64_t base_seed = 0) {
  auto seed_for = [base_seed](int index) {
    return mix64(base_seed ^ (0x5EEDULL + static_cast<std::uint64_t>(index)));
  };
  std::vector<MotionClassSpec> classes;
  classes.push_back({"translate", MotionKind::translate, 2.0, 0.8, 0.6,
                     noise_ratio * 2.0, seed_for(0)});
  classes.push_back({"rotate", MotionKind::rotate_z, 0.2, 0.0, 0.0,
                     noise_ratio * 0.2 * 10.0, seed_for(1)});
  classes.push_back({"zoom", MotionKind::radial_zoom, 0.2, 0.0, 0.0,
                     noise_ratio * 0.2 * 10.0, seed_for(2)});
  classes.push_back({"bob", MotionKind::vertical_bob, 2.4, 0.0, 0.0,
                     noise_ratio * 2.4, seed_for(3)});
  classes.push_back({"static", MotionKind::static_noise, 0.0, 0.0, 0.0,
                     noise_ratio * 2.0, seed_for(4)});
  classes.push_back({"window", MotionKind::mixed_window, 2.4, 0.0, 0.0,
                     noise_ratio * 2.4, seed_for(5)});
  return classes;
}

// Labeled synthetic dataset: per_class volumes for each class, labels set to
// the class index.
inline std::vector<FlowVolume> generate_dataset(
    const std::vector<MotionClassSpec>& classes, int per_class) {
  if (classes.empty()) throw EmptyInput("no motion classes");
  if (per_class <= 0) throw IndexError("per-class volume count must be positive");
  std::vector<FlowVolume> volumes;
  volumes.reserve(classes.size() * static_cast<std::size_t>(per_class));
  for (std::size_t k = 0; k < classes.size(); ++k) {
    for (int t = 0; t < per_class; ++t) {
      FlowVolume vol = generate_volume(classes[k], t);
      vol.label = static_cast<int>(k);
      volumes.push_back(std::move(vol));
    }
  }
  return volumes;
}

// ---------------------------------------------------------------------------
// Textured frame pairs with known integer displacement

// Band-limited random texture: white noise smoothed by a separable box blur,
// then contrast-stretched to [0, 1].  Smoothness matters: gradients must
// carry signal for small-window flow estimation.
inline Frame generate_texture_frame(int width, int height, std::uint64_t seed) {
  Frame frame = make_frame(width, height);
  std::vector<float> noise(static_cast<std::size_t>(width) * height);
  Rng rng(seed, /*stream=*/0x7E87);
  for (float& x : noise) x = static_cast<float>(rng.uniform());

  // Two box-blur passes horizontally and vertically (radius 3) approximate a
  // Gaussian well enough here.
  constexpr int kRadius = 3;
  std::vector<float> tmp(noise.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        float sum = 0.0f;
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          int xx = x + dx;
          xx = xx < 0 ? 0 : (xx >= width ? width - 1 : xx);
          sum += noise[static_cast<std::size_t>(y) * width + xx];
        }
        tmp[static_cast<std::size_t>(y) * width + x] = sum / (2 * kRadius + 1);
      }
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        float sum = 0.0f;
        for (int dy = -kRadius; dy <= kRadius; ++dy) {
          int yy = y + dy;
          yy = yy < 0 ? 0 : (yy >= height ? height - 1 : yy);
          sum += tmp[static_cast<std::size_t>(yy) * width + x];
        }
        noise[static_cast<std::size_t>(y) * width + x] = sum / (2 * kRadius + 1);
      }
    }
  }

  float lo = noise[0], hi = noise[0];
  for (float x : noise) {
    lo = x < lo ? x : lo;
    hi = x > hi ? x : hi;
  }
  const float span = hi - lo > 1e-12f ? hi - lo : 1.0f;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    frame.luma[i] = (noise[i] - lo) / span;
  }
  return frame;
}

// A frame and a copy cyclically shifted by (dx, dy) pixels: every interior
// pixel moves by exactly that displacement, giving ground truth for flow
// estimation.
inline std::pair<Frame, Frame> generate_frame_pair(int dx, int dy,
                                                   std::uint64_t texture_seed,
                                                   int width = 256,
                                                   int height = 256) {
  Frame base = generate_texture_frame(width, height, texture_seed);
  Frame shifted = make_frame(width, height, base.source_timestamp);
  for (int y = 0; y < height; ++y) {
    // Pixel (x, y) of the shifted frame shows what was at (x - dx, y - dy).
    const int sy = ((y - dy) % height + height) % height;
    for (int x = 0; x < width; ++x) {
      const int sx = ((x - dx) % width + width) % width;
      shifted.at(x, y) = base.at(sx, sy);
    }
  }
  return {std::move(base), std::move(shifted)};
}

// n frames where frame k is the base texture cyclically shifted by
// (k*dx, k*dy); timestamps follow the given rate.
inline std::vector<Frame> generate_shifting_frames(int count, int dx, int dy,
                                                   std::uint64_t texture_seed,
                                                   int width = 256,
                                                   int height = 256,
                                                   double fps = kTargetFps) {
  if (count <= 0) throw EmptyInput("frame count must be positive");
  if (!(fps > 0.0)) throw InvalidTimestamps("frame rate must be positive");
  const Frame base = generate_texture_frame(width, height, texture_seed);
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Frame f = make_frame(width, height, static_cast<double>(k) / fps);
    const int ox = k * dx, oy = k * dy;
    for (int y = 0; y < height; ++y) {
      const int sy = ((y - oy) % height + height) % height;
      for (int x = 0; x < width; ++x) {
        const int sx = ((x - ox) % width + width) % width;
        f.at(x, y) = base.at(sx, sy);
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace egoflow
