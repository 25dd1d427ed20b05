// Temporal smoothing of per-block class scores and conversion of the
// smoothed labels into a wall-clock activity timeline.
//
// Blocks start every 30 fields (2 seconds at 15 fps), so block i owns the
// interval [2i, 2i+2) seconds; merged runs of equal labels become segments
// and the segments partition [0, 2 * block_count) exactly.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "egoflow/errors.hpp"
#include "egoflow/volume.hpp"

namespace egoflow {

inline constexpr int kDefaultEta = 21;  // temporal context window (blocks)

struct ScoreSeries {
  std::vector<int> start_frames;             // strictly increasing
  std::vector<std::vector<double>> scores;   // one distribution per block

  std::size_t size() const { return scores.size(); }
};

inline void validate_score_series(const ScoreSeries& series) {
  if (series.scores.empty()) throw EmptyInput("score series is empty");
  if (series.start_frames.size() != series.scores.size()) {
    throw DimensionMismatch("score series start frame count mismatch");
  }
  const std::size_t classes = series.scores.front().size();
  if (classes == 0) throw ShapeError("score vectors must be non-empty");
  for (std::size_t i = 0; i < series.scores.size(); ++i) {
    if (series.scores[i].size() != classes) {
      throw ShapeError("score vectors must all have the same class count");
    }
    if (i > 0 && series.start_frames[i] <= series.start_frames[i - 1]) {
      throw InvalidTimestamps("block start frames must be strictly increasing");
    }
  }
}

struct AggregatedScores {
  std::vector<int> labels;                        // argmax per block
  std::vector<std::vector<double>> window_means;  // mean scores per block
};

// Averages score vectors over a centered window of eta blocks (eta must be
// odd; the window truncates at sequence boundaries), then takes the argmax.
// Ties resolve to the lowest class id.
inline AggregatedScores aggregate_scores(const ScoreSeries& series,
                                         int eta = kDefaultEta) {
  validate_score_series(series);
  if (eta < 1 || eta % 2 == 0) {
    throw InvalidWindow("temporal context must be a positive odd block count, got " +
                        std::to_string(eta));
  }
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t classes =
      static_cast<std::ptrdiff_t>(series.scores.front().size());
  const std::ptrdiff_t half = eta / 2;

  AggregatedScores out;
  out.labels.resize(static_cast<std::size_t>(n));
  out.window_means.resize(static_cast<std::size_t>(n));
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = i - half > 0 ? i - half : 0;
    const std::ptrdiff_t hi = i + half < n - 1 ? i + half : n - 1;
    std::vector<double> mean(static_cast<std::size_t>(classes), 0.0);
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const std::vector<double>& s = series.scores[static_cast<std::size_t>(j)];
      for (std::ptrdiff_t k = 0; k < classes; ++k) {
        mean[static_cast<std::size_t>(k)] += s[static_cast<std::size_t>(k)];
      }
    }
    const double inv = 1.0 / static_cast<double>(hi - lo + 1);
    int best = 0;
    for (std::ptrdiff_t k = 0; k < classes; ++k) {
      mean[static_cast<std::size_t>(k)] *= inv;
      if (mean[static_cast<std::size_t>(k)] > mean[static_cast<std::size_t>(best)]) {
        best = static_cast<int>(k);
      }
    }
    out.labels[static_cast<std::size_t>(i)] = best;
    out.window_means[static_cast<std::size_t>(i)] = std::move(mean);
  }
  return out;
}

inline std::vector<int> aggregate_labels(const ScoreSeries& series,
                                         int eta = kDefaultEta) {
  return aggregate_scores(series, eta).labels;
}

struct TimelineSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  int class_id = 0;
  double mean_score = 1.0;  // mean aggregated score of the run's own class
};

struct ActivityTimeline {
  std::vector<TimelineSegment> segments;
};

// Merges consecutive equal labels into segments.  Block i covers
// [i * stride / fps, (i+1) * stride / fps); when window means are supplied
// each segment's mean_score averages its blocks' aggregated score for the
// segment's class.
inline ActivityTimeline labels_to_timeline(
    const std::vector<int>& labels, double fps = kTargetFps,
    int block_stride = kBlockStride,
    const std::vector<std::vector<double>>* window_means = nullptr) {
  if (labels.empty()) throw EmptyInput("no labels to build a timeline from");
  if (!(fps > 0.0) || block_stride <= 0) {
    throw InvalidTimestamps("fps and block stride must be positive");
  }
  if (window_means && window_means->size() != labels.size()) {
    throw DimensionMismatch("window means do not match label count");
  }
  const double slot = static_cast<double>(block_stride) / fps;

  ActivityTimeline timeline;
  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i < labels.size() && labels[i] == labels[run_start]) continue;
    TimelineSegment seg;
    seg.start_s = static_cast<double>(run_start) * slot;
    seg.end_s = static_cast<double>(i) * slot;
    seg.class_id = labels[run_start];
    if (window_means) {
      double sum = 0.0;
      for (std::size_t j = run_start; j < i; ++j) {
        const std::vector<double>& mean = (*window_means)[j];
        if (seg.class_id < 0 ||
            static_cast<std::size_t>(seg.class_id) >= mean.size()) {
          throw LabelError("timeline label out of range of score vectors");
        }
        sum += mean[static_cast<std::size_t>(seg.class_id)];
      }
      seg.mean_score = sum / static_cast<double>(i - run_start);
    }
    timeline.segments.push_back(seg);
    run_start = i;
  }
  return timeline;
}

inline ActivityTimeline segment_timeline(const ScoreSeries& series,
                                         int eta = kDefaultEta,
                                         double fps = kTargetFps,
                                         int block_stride = kBlockStride) {
  const AggregatedScores agg = aggregate_scores(series, eta);
  return labels_to_timeline(agg.labels, fps, block_stride, &agg.window_means);
}

}  // namespace egoflow
