// Evaluation metrics over temporally-aggregated predictions, group-level
// dataset splits, kernel-class affinity voting, and rendering of first-layer
// kernels as flow-field images (SVG and PPM).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "egoflow/errors.hpp"
#include "egoflow/network.hpp"
#include "egoflow/parallel.hpp"
#include "egoflow/rng.hpp"
#include "egoflow/segmenter.hpp"
#include "egoflow/volume.hpp"

namespace egoflow {

// ---------------------------------------------------------------------------
// Metrics

inline double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // true samples of this class
};

struct EvaluationReport {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<std::vector<std::int64_t>> confusion;  // [true class][predicted]
  std::size_t total = 0;
};

// Precision = diag / column sum, recall = diag / row sum, each 0 when the
// denominator is 0; macro values are unweighted means over all classes.
inline EvaluationReport report_from_confusion(
    const std::vector<std::vector<std::int64_t>>& confusion,
    const std::vector<std::string>& labels) {
  const std::size_t k = labels.size();
  EvaluationReport report;
  report.confusion = confusion;
  std::int64_t correct = 0, total = 0;
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) total += confusion[t][p];
    correct += confusion[t][t];
  }
  report.total = static_cast<std::size_t>(total);
  report.accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::int64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += confusion[c][j];
      col += confusion[j][c];
    }
    ClassMetrics m;
    m.label = labels[c];
    m.support = static_cast<std::size_t>(row);
    m.precision = col > 0 ? static_cast<double>(confusion[c][c]) / col : 0.0;
    m.recall = row > 0 ? static_cast<double>(confusion[c][c]) / row : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
    report.macro_precision += m.precision;
    report.macro_recall += m.recall;
    report.macro_f1 += m.f1;
    report.per_class.push_back(std::move(m));
  }
  report.macro_precision /= static_cast<double>(k);
  report.macro_recall /= static_cast<double>(k);
  report.macro_f1 /= static_cast<double>(k);
  return report;
}

// Evaluates sequences of labeled volumes.  Each inner vector is one
// contiguous recording: its blocks are scored, temporally aggregated with a
// centered window of eta blocks, and the aggregated predictions are compared
// against the block labels.  Every volume must carry a label in range.
inline EvaluationReport evaluate(const NetworkModel& model,
                                 const std::vector<std::vector<FlowVolume>>& sequences,
                                 int eta = kDefaultEta, int threads = 0) {
  const int k = model.num_classes();
  std::vector<const FlowVolume*> flat;
  for (const std::vector<FlowVolume>& seq : sequences) {
    for (const FlowVolume& vol : seq) {
      if (vol.label < 0 || vol.label >= k) {
        throw LabelError("evaluation volume has label " +
                         std::to_string(vol.label) + ", expected [0, " +
                         std::to_string(k) + ")");
      }
      flat.push_back(&vol);
    }
  }
  if (flat.empty()) throw EmptyInput("no volumes to evaluate");

  std::vector<std::vector<double>> all_scores(flat.size());
  const int workers = resolve_thread_count(threads);
  std::vector<nn::Conv3dWorkspace> ws(static_cast<std::size_t>(workers));
  parallel_for(
      flat.size(),
      [&](std::size_t i, int worker) {
        all_scores[i] =
            class_scores(model, *flat[i], &ws[static_cast<std::size_t>(worker)]);
      },
      threads);

  std::vector<std::vector<std::int64_t>> confusion(
      static_cast<std::size_t>(k), std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
  std::size_t cursor = 0;
  for (const std::vector<FlowVolume>& seq : sequences) {
    if (seq.empty()) continue;
    ScoreSeries series;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      series.start_frames.push_back(static_cast<int>(i) * kBlockStride);
      series.scores.push_back(std::move(all_scores[cursor + i]));
    }
    const std::vector<int> predicted = aggregate_labels(series, eta);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      confusion[static_cast<std::size_t>(seq[i].label)]
               [static_cast<std::size_t>(predicted[i])]++;
    }
    cursor += seq.size();
  }
  return report_from_confusion(confusion, model.labels);
}

// ---------------------------------------------------------------------------
// Group-level splits

enum class SplitMode { random_half, group_holdout };

struct SplitSpec {
  SplitMode mode = SplitMode::random_half;
  std::uint64_t seed = 0;
  std::string holdout_group;  // group_holdout only
};

struct SplitResult {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

// Splits sample indices at the group level so all samples of one source
// recording land on the same side.  random_half shuffles the distinct groups
// (first-appearance order, seeded) and assigns the first ceil(G/2) to train;
// group_holdout sends exactly the named group to test.
inline SplitResult split_by_group(const std::vector<std::string>& group_ids,
                                  const SplitSpec& spec) {
  if (group_ids.empty()) throw SplitError("no samples to split");
  std::vector<std::string> groups;
  for (const std::string& g : group_ids) {
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) {
      groups.push_back(g);
    }
  }
  if (groups.size() < 2) {
    throw SplitError("group-level splits need at least two distinct groups");
  }

  std::vector<std::string> train_groups;
  if (spec.mode == SplitMode::random_half) {
    Rng rng(spec.seed, /*stream=*/0x5917);
    rng.shuffle(groups);
    const std::size_t take = (groups.size() + 1) / 2;
    train_groups.assign(groups.begin(),
                        groups.begin() + static_cast<std::ptrdiff_t>(take));
  } else {
    if (std::find(groups.begin(), groups.end(), spec.holdout_group) ==
        groups.end()) {
      throw SplitError("holdout group '" + spec.holdout_group +
                       "' not present in the dataset");
    }
    for (const std::string& g : groups) {
      if (g != spec.holdout_group) train_groups.push_back(g);
    }
  }

  SplitResult result;
  for (std::size_t i = 0; i < group_ids.size(); ++i) {
    const bool in_train = std::find(train_groups.begin(), train_groups.end(),
                                    group_ids[i]) != train_groups.end();
    (in_train ? result.train_indices : result.test_indices).push_back(i);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Kernel-class affinity

struct AffinityMatrix {
  std::vector<std::vector<std::int64_t>> votes;  // [class][kernel]
};

// For every labeled volume, the vote_depth first-layer kernels with the
// strongest max post-ReLU response each cast one vote into the volume's true
// class row.  Response ties rank the lower kernel id first.
inline AffinityMatrix kernel_affinity(const NetworkModel& model,
                                      const std::vector<FlowVolume>& volumes,
                                      int vote_depth = 3, int threads = 0) {
  const int k = model.num_classes();
  const int kernels = model.c1.kernel_count;
  if (vote_depth < 1 || vote_depth > kernels) {
    throw IndexError("vote depth must be in [1, " + std::to_string(kernels) +
                     "], got " + std::to_string(vote_depth));
  }
  if (volumes.empty()) throw EmptyInput("no volumes for affinity analysis");
  for (const FlowVolume& vol : volumes) {
    if (vol.label < 0 || vol.label >= k) {
      throw LabelError("affinity volume has label " + std::to_string(vol.label) +
                       ", expected [0, " + std::to_string(k) + ")");
    }
  }

  std::vector<std::vector<int>> top(volumes.size());
  const int workers = resolve_thread_count(threads);
  std::vector<nn::Conv3dWorkspace> ws(static_cast<std::size_t>(workers));
  parallel_for(
      volumes.size(),
      [&](std::size_t i, int worker) {
        const std::vector<double> responses = c1_kernel_responses(
            model, normalize_volume(volumes[i], model.norm_stats).to_tensor(),
            &ws[static_cast<std::size_t>(worker)]);
        std::vector<int> order(responses.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return responses[static_cast<std::size_t>(a)] >
                 responses[static_cast<std::size_t>(b)];
        });
        order.resize(static_cast<std::size_t>(vote_depth));
        top[i] = std::move(order);
      },
      threads);

  AffinityMatrix matrix;
  matrix.votes.assign(static_cast<std::size_t>(k),
                      std::vector<std::int64_t>(static_cast<std::size_t>(kernels), 0));
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    for (int kernel : top[i]) {
      matrix.votes[static_cast<std::size_t>(volumes[i].label)]
                  [static_cast<std::size_t>(kernel)]++;
    }
  }
  return matrix;
}

inline std::string affinity_to_csv(const AffinityMatrix& matrix,
                                   const std::vector<std::string>& labels) {
  std::string csv = "class";
  const std::size_t kernels = matrix.votes.empty() ? 0 : matrix.votes[0].size();
  for (std::size_t j = 0; j < kernels; ++j) {
    csv += ",kernel_" + std::to_string(j);
  }
  csv.push_back('\n');
  for (std::size_t c = 0; c < matrix.votes.size(); ++c) {
    csv += c < labels.size() ? labels[c] : "class" + std::to_string(c);
    for (std::int64_t v : matrix.votes[c]) {
      csv += "," + std::to_string(v);
    }
    csv.push_back('\n');
  }
  return csv;
}

// ---------------------------------------------------------------------------
// Kernel flow-field rendering

namespace detail_render {

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

struct Arrow {
  double cx = 0.0, cy = 0.0;  // cell center, pixels
  double dx = 0.0, dy = 0.0;  // displacement, pixels (y down)
  bool dot = false;
};

// One arrow per cell: kernel depth slices 2p and 2p+1 are the u and v
// components of pair p; lengths are normalized by the kernel's global max
// magnitude so all pairs of one kernel share a scale.  Entries below 2% of
// the max render as dots.
inline std::vector<std::vector<Arrow>> kernel_arrows(const Tensor3& kernel,
                                                     int cell_px, int step) {
  const int pairs = kernel.dims.depth / 2;
  double max_mag = 0.0;
  for (int p = 0; p < pairs; ++p) {
    for (int r = 0; r < kernel.dims.rows; ++r) {
      for (int c = 0; c < kernel.dims.cols; ++c) {
        const double u = kernel.at(r, c, 2 * p);
        const double v = kernel.at(r, c, 2 * p + 1);
        max_mag = std::max(max_mag, std::sqrt(u * u + v * v));
      }
    }
  }
  const double scale = max_mag > 0.0 ? 0.45 * cell_px / max_mag : 0.0;

  std::vector<std::vector<Arrow>> result(static_cast<std::size_t>(pairs));
  for (int p = 0; p < pairs; ++p) {
    for (int r = 0; r < kernel.dims.rows; r += step) {
      for (int c = 0; c < kernel.dims.cols; c += step) {
        const double u = kernel.at(r, c, 2 * p);
        const double v = kernel.at(r, c, 2 * p + 1);
        Arrow a;
        a.cx = (c + 0.5) * cell_px;
        a.cy = (r + 0.5) * cell_px;
        const double mag = std::sqrt(u * u + v * v);
        if (max_mag == 0.0 || mag < 0.02 * max_mag) {
          a.dot = true;
        } else {
          a.dx = u * scale;
          a.dy = v * scale;
        }
        result[static_cast<std::size_t>(p)].push_back(a);
      }
    }
  }
  return result;
}

}  // namespace detail_render

// Renders each u/v slice pair of one first-layer kernel as an SVG arrow grid
// (u points right, v points down, matching image coordinates).  `step` plots
// every step-th cell on both axes.  Output bytes depend only on the weights,
// so repeated renders of one model are identical.
inline std::vector<std::string> render_kernel_flowfields(const NetworkModel& model,
                                                         int kernel_id,
                                                         int step = 1) {
  if (kernel_id < 0 || kernel_id >= model.c1.kernel_count) {
    throw IndexError("kernel id " + std::to_string(kernel_id) +
                     " out of range [0, " + std::to_string(model.c1.kernel_count) +
                     ")");
  }
  if (step < 1) throw IndexError("arrow step must be >= 1");
  const Tensor3& kernel = model.c1.weights[static_cast<std::size_t>(kernel_id)];
  constexpr int kCell = 24;
  const int width = kernel.dims.cols * kCell;
  const int height = kernel.dims.rows * kCell;
  const auto pairs = detail_render::kernel_arrows(kernel, kCell, step);

  std::vector<std::string> documents;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           std::to_string(width) + "\" height=\"" + std::to_string(height) +
           "\" viewBox=\"0 0 " + std::to_string(width) + " " +
           std::to_string(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const detail_render::Arrow& a : pairs[p]) {
      if (a.dot) {
        svg += "<circle cx=\"" + detail_render::fixed3(a.cx) + "\" cy=\"" +
               detail_render::fixed3(a.cy) + "\" r=\"1.200\" fill=\"black\"/>\n";
        continue;
      }
      const double x1 = a.cx - a.dx, y1 = a.cy - a.dy;
      const double x2 = a.cx + a.dx, y2 = a.cy + a.dy;
      svg += "<line x1=\"" + detail_render::fixed3(x1) + "\" y1=\"" +
             detail_render::fixed3(y1) + "\" x2=\"" + detail_render::fixed3(x2) +
             "\" y2=\"" + detail_render::fixed3(y2) +
             "\" stroke=\"black\" stroke-width=\"1.200\"/>\n";
      // Arrowhead: two barbs at 150 degrees off the shaft direction.
      const double angle = std::atan2(y2 - y1, x2 - x1);
      const double len = std::sqrt((x2 - x1) * (x2 - x1) + (y2 - y1) * (y2 - y1));
      const double barb = std::min(5.0, 0.35 * len);
      for (double offset : {2.6179938779914944, -2.6179938779914944}) {
        const double bx = x2 + barb * std::cos(angle + offset);
        const double by = y2 + barb * std::sin(angle + offset);
        svg += "<line x1=\"" + detail_render::fixed3(x2) + "\" y1=\"" +
               detail_render::fixed3(y2) + "\" x2=\"" + detail_render::fixed3(bx) +
               "\" y2=\"" + detail_render::fixed3(by) +
               "\" stroke=\"black\" stroke-width=\"1.200\"/>\n";
      }
    }
    svg += "</svg>\n";
    documents.push_back(std::move(svg));
  }
  return documents;
}

// PPM (P6) raster rendering of the same arrows; returns one binary image per
// slice pair.
inline std::vector<std::string> render_kernel_flowfields_ppm(
    const NetworkModel& model, int kernel_id, int cell_px = 12, int step = 1) {
  if (kernel_id < 0 || kernel_id >= model.c1.kernel_count) {
    throw IndexError("kernel id " + std::to_string(kernel_id) +
                     " out of range [0, " + std::to_string(model.c1.kernel_count) +
                     ")");
  }
  if (step < 1 || cell_px < 4) {
    throw IndexError("arrow step must be >= 1 and cell size >= 4");
  }
  const Tensor3& kernel = model.c1.weights[static_cast<std::size_t>(kernel_id)];
  const int width = kernel.dims.cols * cell_px;
  const int height = kernel.dims.rows * cell_px;
  const auto pairs = detail_render::kernel_arrows(kernel, cell_px, step);

  std::vector<std::string> images;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    std::vector<std::uint8_t> canvas(
        static_cast<std::size_t>(width) * height * 3, 255);
    auto put = [&](int x, int y) {
      if (x < 0 || y < 0 || x >= width || y >= height) return;
      const std::size_t at = (static_cast<std::size_t>(y) * width + x) * 3;
      canvas[at] = canvas[at + 1] = canvas[at + 2] = 0;
    };
    auto draw_line = [&](double x1, double y1, double x2, double y2) {
      const double len = std::hypot(x2 - x1, y2 - y1);
      const int steps = std::max(1, static_cast<int>(len * 2.0));
      for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        put(static_cast<int>(std::lround(x1 + (x2 - x1) * t)),
            static_cast<int>(std::lround(y1 + (y2 - y1) * t)));
      }
    };
    for (const detail_render::Arrow& a : pairs[p]) {
      if (a.dot) {
        put(static_cast<int>(a.cx), static_cast<int>(a.cy));
        put(static_cast<int>(a.cx) - 1, static_cast<int>(a.cy));
        put(static_cast<int>(a.cx), static_cast<int>(a.cy) - 1);
        put(static_cast<int>(a.cx) - 1, static_cast<int>(a.cy) - 1);
        continue;
      }
      const double x1 = a.cx - a.dx, y1 = a.cy - a.dy;
      const double x2 = a.cx + a.dx, y2 = a.cy + a.dy;
      draw_line(x1, y1, x2, y2);
      const double angle = std::atan2(y2 - y1, x2 - x1);
      const double len = std::hypot(x2 - x1, y2 - y1);
      const double barb = std::min(4.0, 0.35 * len);
      for (double offset : {2.6179938779914944, -2.6179938779914944}) {
        draw_line(x2, y2, x2 + barb * std::cos(angle + offset),
                  y2 + barb * std::sin(angle + offset));
      }
    }
    std::string ppm = "P6\n" + std::to_string(width) + " " +
                      std::to_string(height) + "\n255\n";
    ppm.append(reinterpret_cast<const char*>(canvas.data()), canvas.size());
    images.push_back(std::move(ppm));
  }
  return images;
}

}  // namespace egoflow
