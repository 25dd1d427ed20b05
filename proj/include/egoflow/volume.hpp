// Flow volumes: overlapping 60-field blocks stacked into 32x32x120 tensors
// (u and v planes of field tau land at depths 2*tau and 2*tau + 1), plus the
// percentile normalization fitted on training volumes.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "egoflow/errors.hpp"
#include "egoflow/flow.hpp"
#include "egoflow/tensor.hpp"

namespace egoflow {

inline constexpr int kBlockFields = 60;   // flow fields per block (4 s at 15 fps)
inline constexpr int kBlockStride = 30;   // fields between block starts (50% overlap)

struct FlowVolume {
  static constexpr int kRows = 32;
  static constexpr int kCols = 32;
  static constexpr int kDepth = 2 * kBlockFields;

  std::vector<float> data;  // (row, col, depth) order, depth fastest
  int start_frame = 0;
  int label = -1;  // class id, -1 when unlabeled

  FlowVolume() : data(static_cast<std::size_t>(kRows) * kCols * kDepth, 0.0f) {}

  static std::size_t index(int r, int c, int d) {
    return (static_cast<std::size_t>(r) * kCols + c) * kDepth + d;
  }
  float at(int r, int c, int d) const { return data[index(r, c, d)]; }
  float& at(int r, int c, int d) { return data[index(r, c, d)]; }

  Tensor3 to_tensor() const {
    Tensor3 t(kRows, kCols, kDepth);
    for (std::size_t i = 0; i < data.size(); ++i) t.values[i] = data[i];
    return t;
  }
};

// Overlapping windows of 60 consecutive fields starting every 30 fields.
// Returned spans alias `fields`, which must outlive them.
inline std::vector<std::span<const FlowField>> segment_blocks(
    const std::vector<FlowField>& fields) {
  if (fields.size() < static_cast<std::size_t>(kBlockFields)) {
    throw InsufficientFrames("need at least " + std::to_string(kBlockFields) +
                             " flow fields per block, got " +
                             std::to_string(fields.size()));
  }
  std::vector<std::span<const FlowField>> windows;
  for (std::size_t start = 0; start + kBlockFields <= fields.size();
       start += kBlockStride) {
    windows.emplace_back(fields.data() + start, kBlockFields);
  }
  return windows;
}

inline FlowVolume stack_volume(std::span<const FlowField> window) {
  if (window.size() != static_cast<std::size_t>(kBlockFields)) {
    throw InvalidWindow("block window must hold exactly " +
                        std::to_string(kBlockFields) + " fields, got " +
                        std::to_string(window.size()));
  }
  for (std::size_t i = 1; i < window.size(); ++i) {
    if (window[i].frame_index != window[i - 1].frame_index + 1) {
      throw InvalidWindow("block window fields must be consecutive");
    }
  }
  FlowVolume volume;
  volume.start_frame = window[0].frame_index;
  for (int tau = 0; tau < kBlockFields; ++tau) {
    const FlowField& f = window[tau];
    for (int r = 0; r < FlowVolume::kRows; ++r) {
      for (int c = 0; c < FlowVolume::kCols; ++c) {
        volume.at(r, c, 2 * tau) = f.u_at(r, c);
        volume.at(r, c, 2 * tau + 1) = f.v_at(r, c);
      }
    }
  }
  return volume;
}

inline std::vector<FlowVolume> build_volumes(const std::vector<FlowField>& fields) {
  std::vector<FlowVolume> volumes;
  for (std::span<const FlowField> window : segment_blocks(fields)) {
    volumes.push_back(stack_volume(window));
  }
  return volumes;
}

// ---------------------------------------------------------------------------
// Normalization statistics

struct NormStats {
  float p95_u = 1.0f;
  float p95_v = 1.0f;

  bool operator==(const NormStats&) const = default;
};

namespace detail_norm {

// Exact nearest-rank 95th percentile of |x| over a stream visited twice.
// The bit pattern of a non-negative float orders like its value, so pass 1
// histograms the high 16 pattern bits of |x| to find the 64K-wide bucket
// holding the answer, and pass 2 histograms the low 16 bits within that
// bucket.  Matches a full sort exactly with O(1) memory for any stream size.
inline float percentile95_two_pass(
    const std::function<void(const std::function<void(float)>&)>& visit) {
  constexpr std::uint32_t kBuckets = 1u << 16;
  auto pattern_of = [](float x) -> std::uint32_t {
    return std::bit_cast<std::uint32_t>(std::fabs(x));
  };

  std::vector<std::uint64_t> high_counts(kBuckets, 0);
  std::uint64_t total = 0;
  visit([&](float x) {
    high_counts[pattern_of(x) >> 16]++;
    total++;
  });
  if (total == 0) throw EmptyInput("no values to take a percentile of");

  // Nearest rank: k-th smallest, 1-indexed, k = ceil(0.95 * n).
  const std::uint64_t rank = (19 * total + 19) / 20;
  std::uint64_t before = 0;
  std::uint32_t target = 0;
  for (std::uint32_t b = 0; b < kBuckets; ++b) {
    if (before + high_counts[b] >= rank) {
      target = b;
      break;
    }
    before += high_counts[b];
  }

  std::vector<std::uint64_t> low_counts(kBuckets, 0);
  visit([&](float x) {
    const std::uint32_t p = pattern_of(x);
    if ((p >> 16) == target) low_counts[p & 0xffffu]++;
  });
  std::uint64_t cum = before;
  for (std::uint32_t low = 0; low < kBuckets; ++low) {
    cum += low_counts[low];
    if (cum >= rank) {
      return std::bit_cast<float>((target << 16) | low);
    }
  }
  throw NumericError("percentile selection failed");  // unreachable
}

}  // namespace detail_norm

// 95th percentile (nearest rank) of |u| and |v| pooled over all volumes.
// Zero percentiles are replaced by 1e-6 so normalization stays defined.
inline NormStats fit_norm_stats(const std::vector<FlowVolume>& volumes) {
  if (volumes.empty()) throw EmptyInput("no volumes to fit normalization on");
  auto channel_visitor = [&volumes](int phase) {
    return [&volumes, phase](const std::function<void(float)>& sink) {
      for (const FlowVolume& vol : volumes) {
        for (std::size_t i = static_cast<std::size_t>(phase); i < vol.data.size();
             i += 2) {
          sink(vol.data[i]);
        }
      }
    };
  };
  NormStats stats;
  stats.p95_u = detail_norm::percentile95_two_pass(channel_visitor(0));
  stats.p95_v = detail_norm::percentile95_two_pass(channel_visitor(1));
  if (!std::isfinite(stats.p95_u) || !std::isfinite(stats.p95_v)) {
    throw NumericError("percentile statistics are not finite");
  }
  if (stats.p95_u <= 0.0f) stats.p95_u = 1e-6f;
  if (stats.p95_v <= 0.0f) stats.p95_v = 1e-6f;
  return stats;
}

inline void validate_norm_stats(const NormStats& stats) {
  if (!(stats.p95_u > 0.0f) || !(stats.p95_v > 0.0f) ||
      !std::isfinite(stats.p95_u) || !std::isfinite(stats.p95_v)) {
    throw NormalizationError("normalization statistics must be finite and positive");
  }
}

// Clamp each u value to [-p95_u, p95_u] and divide by p95_u (same for v), so
// every entry lands in [-1, 1].
inline void normalize_volume_inplace(FlowVolume& volume, const NormStats& stats) {
  validate_norm_stats(stats);
  const float pu = stats.p95_u;
  const float pv = stats.p95_v;
  for (std::size_t i = 0; i < volume.data.size(); i += 2) {
    float u = volume.data[i];
    volume.data[i] = (u < -pu ? -pu : (u > pu ? pu : u)) / pu;
    float v = volume.data[i + 1];
    volume.data[i + 1] = (v < -pv ? -pv : (v > pv ? pv : v)) / pv;
  }
}

inline FlowVolume normalize_volume(FlowVolume volume, const NormStats& stats) {
  normalize_volume_inplace(volume, stats);
  return volume;
}

}  // namespace egoflow
