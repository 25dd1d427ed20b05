// The compact 3D CNN: conv3d (30 kernels 17x17x20, stride 2,2,4) -> ReLU ->
// per-kernel max pool (2x2x13) -> depth concat -> conv2d (100 kernels 3x3
// across all channels) -> ReLU -> max pool 2x2 -> dense 400 -> ReLU ->
// dense 50 -> ReLU -> classifier -> softmax.  On 32x32x120 inputs the shape
// chain is 30x(8x8x26) -> 4x4x60 -> 2x2x100 -> 1x1x100 -> 400 -> 50 -> K.
//
// Training is plain SGD on the mean minibatch gradient.  Samples of a batch
// are processed in parallel into per-slot gradient buffers that are reduced
// in slot order, so results are bit-identical for any thread count.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "egoflow/errors.hpp"
#include "egoflow/io.hpp"
#include "egoflow/nn.hpp"
#include "egoflow/parallel.hpp"
#include "egoflow/rng.hpp"
#include "egoflow/tensor.hpp"
#include "egoflow/volume.hpp"

namespace egoflow {

struct ModelGeometry {
  Dims3 input{FlowVolume::kRows, FlowVolume::kCols, FlowVolume::kDepth};
  int c1_kernels = 30;
  Dims3 c1_kernel{17, 17, 20};
  Dims3 c1_stride{2, 2, 4};
  Dims3 p1_window{2, 2, 13};
  Dims3 p1_stride{2, 2, 13};
  int c2_kernels = 100;
  int c2_kernel = 3;  // square spatial extent; spans all input channels
  int pool2_window = 2;
  int pool2_stride = 2;
  int fc1_out = 400;
  int fc2_out = 50;

  bool operator==(const ModelGeometry&) const = default;
};

// Per-layer output shapes implied by a geometry; construction validates that
// every stage is realizable (positive extents, pools tile their inputs).
struct ModelDims {
  Dims3 c1_out;     // one conv3d kernel map
  Dims3 p1_out;     // one pooled map
  Dims3 concat;     // pooled maps concatenated along depth, kernel-major
  Dims3 c2_out;
  Dims3 pool2_out;
  int flat = 0;
};

inline ModelDims compute_dims(const ModelGeometry& g) {
  ModelDims d;
  d.c1_out = Dims3{
      nn::conv_out_extent(g.input.rows, g.c1_kernel.rows, g.c1_stride.rows, "rows"),
      nn::conv_out_extent(g.input.cols, g.c1_kernel.cols, g.c1_stride.cols, "cols"),
      nn::conv_out_extent(g.input.depth, g.c1_kernel.depth, g.c1_stride.depth,
                          "depth")};
  d.p1_out = nn::pool3d_output_dims(d.c1_out, {g.p1_window, g.p1_stride},
                                    /*strict_tiling=*/true);
  d.concat = Dims3{d.p1_out.rows, d.p1_out.cols, d.p1_out.depth * g.c1_kernels};
  d.c2_out = Dims3{
      nn::conv_out_extent(d.concat.rows, g.c2_kernel, 1, "rows"),
      nn::conv_out_extent(d.concat.cols, g.c2_kernel, 1, "cols"), g.c2_kernels};
  d.pool2_out = nn::pool3d_output_dims(
      d.c2_out,
      {{g.pool2_window, g.pool2_window, 1}, {g.pool2_stride, g.pool2_stride, 1}},
      /*strict_tiling=*/true);
  d.flat = static_cast<int>(d.pool2_out.count());
  if (g.fc1_out <= 0 || g.fc2_out <= 0) {
    throw ShapeError("dense layer widths must be positive");
  }
  return d;
}

struct NetworkModel {
  ModelGeometry geometry;
  nn::ConvSpec3D c1;
  nn::PoolSpec3D p1;
  nn::ConvSpec2D c2;
  nn::DenseSpec fc1;
  nn::DenseSpec fc2;
  nn::DenseSpec classifier;
  NormStats norm_stats{1.0f, 1.0f};
  std::vector<std::string> labels;
  std::uint64_t seed = 0;

  int num_classes() const { return static_cast<int>(labels.size()); }
};

inline void validate_labels(const std::vector<std::string>& labels) {
  if (labels.size() < 2) {
    throw LabelError("a classifier needs at least two class labels");
  }
  std::set<std::string> seen;
  for (const std::string& name : labels) {
    if (name.empty() || name.find('\n') != std::string::npos) {
      throw LabelError("class labels must be non-empty, single-line strings");
    }
    if (!seen.insert(name).second) {
      throw LabelError("duplicate class label '" + name + "'");
    }
  }
}

// Xavier-initialized model.  Convolution fans follow the usual convention:
// fan_in = in_channels * receptive field, fan_out = out_channels * receptive
// field.  Each layer draws from its own seed stream; biases start at zero.
inline NetworkModel make_model(const ModelGeometry& geometry,
                               const std::vector<std::string>& labels,
                               std::uint64_t seed) {
  validate_labels(labels);
  const ModelDims dims = compute_dims(geometry);
  const int classes = static_cast<int>(labels.size());

  NetworkModel m;
  m.geometry = geometry;
  m.labels = labels;
  m.seed = seed;

  m.c1.kernel_count = geometry.c1_kernels;
  m.c1.kernel_dims = geometry.c1_kernel;
  m.c1.stride = geometry.c1_stride;
  {
    const std::size_t rfs = geometry.c1_kernel.count();
    const std::vector<double> flat = nn::xavier_init(
        static_cast<int>(rfs), geometry.c1_kernels * static_cast<int>(rfs),
        mix64(seed) ^ 0x01, rfs * geometry.c1_kernels);
    m.c1.weights.assign(geometry.c1_kernels, Tensor3(geometry.c1_kernel));
    for (int k = 0; k < geometry.c1_kernels; ++k) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k * rfs), rfs,
                  m.c1.weights[k].values.begin());
    }
    m.c1.biases.assign(geometry.c1_kernels, 0.0);
  }
  m.p1 = nn::PoolSpec3D{geometry.p1_window, geometry.p1_stride};

  m.c2.kernel_count = geometry.c2_kernels;
  m.c2.kernel_rows = geometry.c2_kernel;
  m.c2.kernel_cols = geometry.c2_kernel;
  m.c2.in_channels = dims.concat.depth;
  {
    const std::size_t rfs =
        static_cast<std::size_t>(geometry.c2_kernel) * geometry.c2_kernel;
    const std::size_t per_kernel = rfs * dims.concat.depth;
    const std::vector<double> flat = nn::xavier_init(
        dims.concat.depth * static_cast<int>(rfs),
        geometry.c2_kernels * static_cast<int>(rfs), mix64(seed) ^ 0x02,
        per_kernel * geometry.c2_kernels);
    m.c2.weights.assign(
        geometry.c2_kernels,
        Tensor3(geometry.c2_kernel, geometry.c2_kernel, dims.concat.depth));
    for (int k = 0; k < geometry.c2_kernels; ++k) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k * per_kernel),
                  per_kernel, m.c2.weights[k].values.begin());
    }
    m.c2.biases.assign(geometry.c2_kernels, 0.0);
  }

  auto make_dense = [](int in, int out, std::uint64_t layer_seed) {
    nn::DenseSpec d;
    d.in_size = in;
    d.out_size = out;
    d.weights = nn::xavier_init(in, out, layer_seed,
                                static_cast<std::size_t>(in) * out);
    d.biases.assign(out, 0.0);
    return d;
  };
  m.fc1 = make_dense(dims.flat, geometry.fc1_out, mix64(seed) ^ 0x03);
  m.fc2 = make_dense(geometry.fc1_out, geometry.fc2_out, mix64(seed) ^ 0x04);
  m.classifier = make_dense(geometry.fc2_out, classes, mix64(seed) ^ 0x05);
  return m;
}

inline NetworkModel make_standard_model(const std::vector<std::string>& labels,
                                        std::uint64_t seed) {
  return make_model(ModelGeometry{}, labels, seed);
}

struct ParameterCounts {
  std::size_t weights_excluding_classifier = 0;  // weights only, no biases
  std::size_t total_with_biases = 0;             // everything, classifier included
};

inline ParameterCounts count_parameters(const NetworkModel& m) {
  ParameterCounts counts;
  std::size_t conv_w = 0;
  for (const Tensor3& w : m.c1.weights) conv_w += w.size();
  for (const Tensor3& w : m.c2.weights) conv_w += w.size();
  counts.weights_excluding_classifier =
      conv_w + m.fc1.weights.size() + m.fc2.weights.size();
  counts.total_with_biases = counts.weights_excluding_classifier +
                             m.classifier.weights.size() + m.c1.biases.size() +
                             m.c2.biases.size() + m.fc1.biases.size() +
                             m.fc2.biases.size() + m.classifier.biases.size();
  return counts;
}

// ---------------------------------------------------------------------------
// Forward and backward

struct ForwardTrace {
  Tensor3 input;
  std::vector<Tensor3> c1_pre;         // conv3d outputs before ReLU
  std::vector<nn::Pool3dResult> p1;    // pooled ReLU maps, with argmax
  Tensor3 concat;
  Tensor3 c2_pre;
  nn::Pool3dResult pool2;
  std::vector<double> flat;
  std::vector<double> fc1_pre, fc1_act;
  std::vector<double> fc2_pre, fc2_act;
  std::vector<double> logits, probs;
};

inline std::vector<double> forward_network(const NetworkModel& m,
                                           const Tensor3& input,
                                           ForwardTrace* trace = nullptr,
                                           nn::Conv3dWorkspace* ws = nullptr) {
  if (!(input.dims == m.geometry.input)) {
    throw DimensionMismatch("network expects input " + m.geometry.input.str() +
                            ", got " + input.dims.str());
  }
  std::vector<Tensor3> c1_pre = nn::conv3d_forward(input, m.c1, ws);
  const int kn = m.c1.kernel_count;

  std::vector<nn::Pool3dResult> p1(static_cast<std::size_t>(kn));
  for (int k = 0; k < kn; ++k) {
    p1[k] = nn::maxpool3d_forward(nn::relu_forward(c1_pre[k]), m.p1,
                                  /*strict_tiling=*/true);
  }

  const Dims3 pd = p1[0].output.dims;
  Tensor3 concat(pd.rows, pd.cols, pd.depth * kn);
  for (int k = 0; k < kn; ++k) {
    const Tensor3& src = p1[k].output;
    for (int r = 0; r < pd.rows; ++r) {
      for (int c = 0; c < pd.cols; ++c) {
        for (int d = 0; d < pd.depth; ++d) {
          concat.at(r, c, k * pd.depth + d) = src.at(r, c, d);
        }
      }
    }
  }

  Tensor3 c2_pre = nn::conv2d_forward(concat, m.c2);
  nn::Pool3dResult pool2 =
      nn::maxpool2d_forward(nn::relu_forward(c2_pre), m.geometry.pool2_window,
                            m.geometry.pool2_stride, /*strict_tiling=*/true);

  std::vector<double> flat = pool2.output.values;
  std::vector<double> fc1_pre = nn::dense_forward(m.fc1, flat);
  std::vector<double> fc1_act = nn::relu_forward(fc1_pre);
  std::vector<double> fc2_pre = nn::dense_forward(m.fc2, fc1_act);
  std::vector<double> fc2_act = nn::relu_forward(fc2_pre);
  std::vector<double> logits = nn::dense_forward(m.classifier, fc2_act);
  std::vector<double> probs = nn::softmax(logits);

  if (trace) {
    trace->input = input;
    trace->c1_pre = std::move(c1_pre);
    trace->p1 = std::move(p1);
    trace->concat = std::move(concat);
    trace->c2_pre = std::move(c2_pre);
    trace->pool2 = std::move(pool2);
    trace->flat = std::move(flat);
    trace->fc1_pre = std::move(fc1_pre);
    trace->fc1_act = std::move(fc1_act);
    trace->fc2_pre = std::move(fc2_pre);
    trace->fc2_act = std::move(fc2_act);
    trace->logits = std::move(logits);
    trace->probs = probs;
  }
  return probs;
}

// Normalizes a raw volume with the model's statistics and runs the network.
inline std::vector<double> class_scores(const NetworkModel& m,
                                        const FlowVolume& raw,
                                        nn::Conv3dWorkspace* ws = nullptr) {
  return forward_network(m, normalize_volume(raw, m.norm_stats).to_tensor(),
                         nullptr, ws);
}

// Max post-ReLU response of each first-layer kernel map; the affinity
// analysis ranks kernels by these.
inline std::vector<double> c1_kernel_responses(const NetworkModel& m,
                                               const Tensor3& input,
                                               nn::Conv3dWorkspace* ws = nullptr) {
  std::vector<Tensor3> maps = nn::conv3d_forward(input, m.c1, ws);
  std::vector<double> responses(maps.size());
  for (std::size_t k = 0; k < maps.size(); ++k) {
    double peak = 0.0;  // post-ReLU floor
    for (double v : maps[k].values) peak = v > peak ? v : peak;
    responses[k] = peak;
  }
  return responses;
}

struct ModelGrads {
  std::vector<Tensor3> c1_w;
  std::vector<double> c1_b;
  std::vector<Tensor3> c2_w;
  std::vector<double> c2_b;
  std::vector<double> fc1_w, fc1_b;
  std::vector<double> fc2_w, fc2_b;
  std::vector<double> cls_w, cls_b;

  void init_like(const NetworkModel& m) {
    c1_w.assign(m.c1.kernel_count, Tensor3(m.c1.kernel_dims));
    c1_b.assign(m.c1.biases.size(), 0.0);
    c2_w.assign(m.c2.kernel_count,
                Tensor3(m.c2.kernel_rows, m.c2.kernel_cols, m.c2.in_channels));
    c2_b.assign(m.c2.biases.size(), 0.0);
    fc1_w.assign(m.fc1.weights.size(), 0.0);
    fc1_b.assign(m.fc1.biases.size(), 0.0);
    fc2_w.assign(m.fc2.weights.size(), 0.0);
    fc2_b.assign(m.fc2.biases.size(), 0.0);
    cls_w.assign(m.classifier.weights.size(), 0.0);
    cls_b.assign(m.classifier.biases.size(), 0.0);
  }

  void accumulate(const ModelGrads& o) {
    auto add = [](std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    for (std::size_t k = 0; k < c1_w.size(); ++k) add(c1_w[k].values, o.c1_w[k].values);
    add(c1_b, o.c1_b);
    for (std::size_t k = 0; k < c2_w.size(); ++k) add(c2_w[k].values, o.c2_w[k].values);
    add(c2_b, o.c2_b);
    add(fc1_w, o.fc1_w);
    add(fc1_b, o.fc1_b);
    add(fc2_w, o.fc2_w);
    add(fc2_b, o.fc2_b);
    add(cls_w, o.cls_w);
    add(cls_b, o.cls_b);
  }

  void scale(double s) {
    auto mul = [s](std::vector<double>& a) {
      for (double& v : a) v *= s;
    };
    for (Tensor3& t : c1_w) mul(t.values);
    mul(c1_b);
    for (Tensor3& t : c2_w) mul(t.values);
    mul(c2_b);
    mul(fc1_w);
    mul(fc1_b);
    mul(fc2_w);
    mul(fc2_b);
    mul(cls_w);
    mul(cls_b);
  }
};

// Backpropagation for one sample.  Returns the cross-entropy loss and fills
// `out` with parameter gradients (input gradient is never needed: conv3d is
// the first layer).  With backbone_frozen only classifier gradients are
// produced.  Passing the workspace used by the forward pass reuses its patch
// matrix for the conv3d weight gradient.
inline double backward_network(const NetworkModel& m, const ForwardTrace& trace,
                               int label, ModelGrads& out,
                               bool backbone_frozen = false,
                               nn::Conv3dWorkspace* ws = nullptr) {
  const nn::CrossEntropyResult ce = nn::cross_entropy(trace.probs, label);

  nn::DenseGrads cls = nn::dense_backward(m.classifier, trace.fc2_act, ce.logit_grad);
  out.cls_w = std::move(cls.weight_grads);
  out.cls_b = std::move(cls.bias_grads);
  if (backbone_frozen) return ce.loss;

  std::vector<double> dfc2_pre = nn::relu_backward(trace.fc2_pre, cls.input_grad);
  nn::DenseGrads fc2 = nn::dense_backward(m.fc2, trace.fc1_act, dfc2_pre);
  out.fc2_w = std::move(fc2.weight_grads);
  out.fc2_b = std::move(fc2.bias_grads);

  std::vector<double> dfc1_pre = nn::relu_backward(trace.fc1_pre, fc2.input_grad);
  nn::DenseGrads fc1 = nn::dense_backward(m.fc1, trace.flat, dfc1_pre);
  out.fc1_w = std::move(fc1.weight_grads);
  out.fc1_b = std::move(fc1.bias_grads);

  Tensor3 dpool2(trace.pool2.output.dims);
  dpool2.values = fc1.input_grad;
  Tensor3 dc2_act = nn::maxpool2d_backward(trace.c2_pre.dims, trace.pool2, dpool2);
  Tensor3 dc2_pre = nn::relu_backward(trace.c2_pre, dc2_act);
  nn::Conv2dGrads c2 = nn::conv2d_backward(trace.concat, m.c2, dc2_pre);
  out.c2_w = std::move(c2.weight_grads);
  out.c2_b = std::move(c2.bias_grads);

  const int kn = m.c1.kernel_count;
  const Dims3 pd = trace.p1[0].output.dims;
  std::vector<Tensor3> dc1_pre(static_cast<std::size_t>(kn));
  for (int k = 0; k < kn; ++k) {
    Tensor3 dpooled(pd);
    for (int r = 0; r < pd.rows; ++r) {
      for (int c = 0; c < pd.cols; ++c) {
        for (int d = 0; d < pd.depth; ++d) {
          dpooled.at(r, c, d) = c2.input_grad.at(r, c, k * pd.depth + d);
        }
      }
    }
    Tensor3 dact = nn::maxpool3d_backward(trace.c1_pre[k].dims, trace.p1[k], dpooled);
    dc1_pre[k] = nn::relu_backward(trace.c1_pre[k], dact);
  }
  nn::Conv3dGrads c1 = nn::conv3d_backward(trace.input, m.c1, dc1_pre,
                                           /*need_input_grad=*/false, ws);
  out.c1_w = std::move(c1.weight_grads);
  out.c1_b = std::move(c1.bias_grads);
  return ce.loss;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  enum class Mode { full, last_layer_only, warm_start };

  double learning_rate = 0.01;
  int batch_size = 64;
  int iterations = 3000;
  std::uint64_t seed = 0;
  Mode mode = Mode::full;
  int threads = 0;  // 0: EGOFLOW_THREADS or hardware concurrency
  std::optional<NormStats> norm_stats;  // full mode: fitted from data if unset
  std::vector<double>* loss_history = nullptr;          // mean batch loss per iteration
  std::function<void(int, double)> on_progress;         // (iteration, mean loss)
};

// A dataset the trainer samples by index.  get(i) must return the same
// labeled volume every call (volumes are raw; the trainer normalizes).
struct SampleSource {
  std::size_t count = 0;
  std::function<FlowVolume(std::size_t)> get;
};

inline SampleSource make_sample_source(const std::vector<FlowVolume>& volumes) {
  return SampleSource{volumes.size(),
                      [&volumes](std::size_t i) { return volumes[i]; }};
}

namespace detail_train {

inline void apply_sgd(NetworkModel& m, const ModelGrads& g, double lr,
                      bool classifier_only) {
  using nn::sgd_step;
  sgd_step(m.classifier.weights, g.cls_w, lr);
  sgd_step(m.classifier.biases, g.cls_b, lr);
  if (classifier_only) return;
  for (int k = 0; k < m.c1.kernel_count; ++k) {
    sgd_step(m.c1.weights[k].values, g.c1_w[k].values, lr);
  }
  sgd_step(m.c1.biases, g.c1_b, lr);
  for (int k = 0; k < m.c2.kernel_count; ++k) {
    sgd_step(m.c2.weights[k].values, g.c2_w[k].values, lr);
  }
  sgd_step(m.c2.biases, g.c2_b, lr);
  sgd_step(m.fc1.weights, g.fc1_w, lr);
  sgd_step(m.fc1.biases, g.fc1_b, lr);
  sgd_step(m.fc2.weights, g.fc2_w, lr);
  sgd_step(m.fc2.biases, g.fc2_b, lr);
}

// Scans every sample once: label range/coverage checks.
inline std::vector<int> scan_labels(const SampleSource& data, int classes) {
  if (data.count == 0) throw EmptyInput("training dataset is empty");
  std::vector<int> sample_labels(data.count);
  std::vector<std::size_t> per_class(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < data.count; ++i) {
    const FlowVolume vol = data.get(i);
    if (vol.label < 0 || vol.label >= classes) {
      throw LabelError("sample " + std::to_string(i) + " has label " +
                       std::to_string(vol.label) + ", expected [0, " +
                       std::to_string(classes) + ")");
    }
    sample_labels[i] = vol.label;
    per_class[static_cast<std::size_t>(vol.label)]++;
  }
  for (int k = 0; k < classes; ++k) {
    if (per_class[static_cast<std::size_t>(k)] == 0) {
      throw DatasetError("class " + std::to_string(k) +
                         " has no training samples");
    }
  }
  return sample_labels;
}

inline NormStats fit_stats_streaming(const SampleSource& data) {
  auto channel_visitor = [&data](int phase) {
    return [&data, phase](const std::function<void(float)>& sink) {
      for (std::size_t i = 0; i < data.count; ++i) {
        const FlowVolume vol = data.get(i);
        for (std::size_t j = static_cast<std::size_t>(phase);
             j < vol.data.size(); j += 2) {
          sink(vol.data[j]);
        }
      }
    };
  };
  NormStats stats;
  stats.p95_u = detail_norm::percentile95_two_pass(channel_visitor(0));
  stats.p95_v = detail_norm::percentile95_two_pass(channel_visitor(1));
  if (stats.p95_u <= 0.0f) stats.p95_u = 1e-6f;
  if (stats.p95_v <= 0.0f) stats.p95_v = 1e-6f;
  return stats;
}

// Classifier-only training on cached penultimate-layer features.  forward is
// deterministic, so one cached evaluation per sample is bit-identical to
// re-running the frozen backbone every iteration.
inline void train_classifier_on_features(NetworkModel& m,
                                         const std::vector<std::vector<double>>& feats,
                                         const std::vector<int>& sample_labels,
                                         const TrainConfig& cfg) {
  Rng sampler(cfg.seed, /*stream=*/0xBA7C);
  const std::size_t n = feats.size();
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::vector<double> grad_w(m.classifier.weights.size(), 0.0);
    std::vector<double> grad_b(m.classifier.biases.size(), 0.0);
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = sampler.index(n);
      const std::vector<double> logits = nn::dense_forward(m.classifier, feats[idx]);
      const nn::CrossEntropyResult ce =
          nn::cross_entropy(nn::softmax(logits), sample_labels[idx]);
      loss_sum += ce.loss;
      const nn::DenseGrads g =
          nn::dense_backward(m.classifier, feats[idx], ce.logit_grad);
      for (std::size_t i = 0; i < grad_w.size(); ++i) grad_w[i] += g.weight_grads[i];
      for (std::size_t i = 0; i < grad_b.size(); ++i) grad_b[i] += g.bias_grads[i];
    }
    const double inv = 1.0 / cfg.batch_size;
    for (double& v : grad_w) v *= inv;
    for (double& v : grad_b) v *= inv;
    const double mean_loss = loss_sum * inv;
    if (!std::isfinite(mean_loss)) {
      throw NumericError("training loss became non-finite at iteration " +
                         std::to_string(iter));
    }
    nn::sgd_step(m.classifier.weights, grad_w, cfg.learning_rate);
    nn::sgd_step(m.classifier.biases, grad_b, cfg.learning_rate);
    if (cfg.loss_history) cfg.loss_history->push_back(mean_loss);
    if (cfg.on_progress) cfg.on_progress(iter, mean_loss);
  }
}

}  // namespace detail_train

// Trains a model with plain SGD (mean gradient over uniformly resampled
// minibatches).
//
// Modes:
//   full            fresh Xavier weights (geometry from `init` if given,
//                   otherwise the standard one); normalization statistics
//                   come from cfg.norm_stats or are fitted on the dataset.
//   last_layer_only requires `init`; copies it, re-initializes the classifier
//                   for the new label set and updates only the classifier.
//                   Backbone weights stay bitwise identical.
//   warm_start      requires `init`; continues from its weights (classifier
//                   re-initialized when the class count changes).
// Transfer modes keep the initial model's normalization statistics;
// cfg.norm_stats must be absent or equal to them.
inline NetworkModel train(const SampleSource& data,
                          const std::vector<std::string>& labels,
                          const TrainConfig& cfg,
                          const NetworkModel* init = nullptr) {
  validate_labels(labels);
  const int classes = static_cast<int>(labels.size());
  if (cfg.batch_size <= 0 || cfg.iterations < 0 || !(cfg.learning_rate > 0.0)) {
    throw Error(ErrorKind::usage,
                "batch size and learning rate must be positive, iterations >= 0");
  }
  const bool transfer = cfg.mode != TrainConfig::Mode::full;
  if (transfer && init == nullptr) {
    throw Error(ErrorKind::usage, "transfer training modes need an initial model");
  }

  const std::vector<int> sample_labels = detail_train::scan_labels(data, classes);

  NetworkModel model;
  if (cfg.mode == TrainConfig::Mode::full) {
    const ModelGeometry geometry = init ? init->geometry : ModelGeometry{};
    model = make_model(geometry, labels, cfg.seed);
    if (cfg.norm_stats) {
      validate_norm_stats(*cfg.norm_stats);
      model.norm_stats = *cfg.norm_stats;
    } else {
      model.norm_stats = detail_train::fit_stats_streaming(data);
    }
  } else {
    if (cfg.norm_stats && !(*cfg.norm_stats == init->norm_stats)) {
      throw NormalizationError(
          "transfer training must keep the initial model's normalization "
          "statistics");
    }
    model = *init;
    model.labels = labels;
    model.seed = cfg.seed;
    if (cfg.mode == TrainConfig::Mode::last_layer_only ||
        init->num_classes() != classes) {
      nn::DenseSpec fresh;
      fresh.in_size = model.fc2.out_size;
      fresh.out_size = classes;
      fresh.weights = nn::xavier_init(
          fresh.in_size, classes, mix64(cfg.seed) ^ 0x05,
          static_cast<std::size_t>(fresh.in_size) * classes);
      fresh.biases.assign(static_cast<std::size_t>(classes), 0.0);
      model.classifier = std::move(fresh);
    }
  }

  if (cfg.mode == TrainConfig::Mode::last_layer_only) {
    // Frozen backbone: evaluate it once per sample, then train the classifier
    // on the cached features.
    std::vector<std::vector<double>> feats(data.count);
    const int workers = resolve_thread_count(cfg.threads);
    std::vector<nn::Conv3dWorkspace> ws(static_cast<std::size_t>(workers));
    parallel_for(
        data.count,
        [&](std::size_t i, int worker) {
          ForwardTrace trace;
          const FlowVolume vol = data.get(i);
          forward_network(model,
                          normalize_volume(vol, model.norm_stats).to_tensor(),
                          &trace, &ws[static_cast<std::size_t>(worker)]);
          feats[i] = std::move(trace.fc2_act);
        },
        cfg.threads);
    detail_train::train_classifier_on_features(model, feats, sample_labels, cfg);
    return model;
  }

  // Full backprop path (modes full and warm_start).
  Rng sampler(cfg.seed, /*stream=*/0xBA7C);
  const int workers = resolve_thread_count(cfg.threads);
  std::vector<nn::Conv3dWorkspace> ws(static_cast<std::size_t>(workers));
  std::vector<ModelGrads> slot_grads(static_cast<std::size_t>(cfg.batch_size));
  std::vector<double> slot_loss(static_cast<std::size_t>(cfg.batch_size));
  std::vector<std::size_t> batch_indices(static_cast<std::size_t>(cfg.batch_size));

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      batch_indices[static_cast<std::size_t>(b)] = sampler.index(data.count);
    }
    parallel_for(
        static_cast<std::size_t>(cfg.batch_size),
        [&](std::size_t b, int worker) {
          const std::size_t idx = batch_indices[b];
          const FlowVolume vol = data.get(idx);
          ForwardTrace trace;
          nn::Conv3dWorkspace& w = ws[static_cast<std::size_t>(worker)];
          forward_network(model,
                          normalize_volume(vol, model.norm_stats).to_tensor(),
                          &trace, &w);
          slot_loss[b] = backward_network(model, trace, sample_labels[idx],
                                          slot_grads[b], false, &w);
        },
        cfg.threads);

    ModelGrads total;
    total.init_like(model);
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      total.accumulate(slot_grads[static_cast<std::size_t>(b)]);
      loss_sum += slot_loss[static_cast<std::size_t>(b)];
    }
    total.scale(1.0 / cfg.batch_size);
    const double mean_loss = loss_sum / cfg.batch_size;
    if (!std::isfinite(mean_loss)) {
      throw NumericError("training loss became non-finite at iteration " +
                         std::to_string(iter));
    }
    detail_train::apply_sgd(model, total, cfg.learning_rate, false);
    if (cfg.loss_history) cfg.loss_history->push_back(mean_loss);
    if (cfg.on_progress) cfg.on_progress(iter, mean_loss);
  }
  return model;
}

inline NetworkModel train(const std::vector<FlowVolume>& dataset,
                          const std::vector<std::string>& labels,
                          const TrainConfig& cfg,
                          const NetworkModel* init = nullptr) {
  return train(make_sample_source(dataset), labels, cfg, init);
}

// ---------------------------------------------------------------------------
// Model serialization: "EGNT", u32 version=1, u32 class count, u32 label
// block length + '\n'-joined labels, f32 p95_u, f32 p95_v, u64 seed, then the
// layers in order conv3d, conv2d, dense x3.  Each layer stores a u32 count of
// u32 descriptor fields, the fields, then f32 weights and f32 biases.  The
// conv3d descriptor carries kernel count/dims/strides, pool window/strides
// and the input dims, so any geometry round-trips; conv2d carries kernel
// count/extent/channels and the second pool; dense layers store (out, in).
inline void save_model(const std::string& path, const NetworkModel& m) {
  std::ofstream out = io::open_for_write(path);
  io::put_magic(out, "EGNT");
  io::put_u32(out, 1);
  io::put_u32(out, static_cast<std::uint32_t>(m.labels.size()));
  std::string block;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (i) block.push_back('\n');
    block += m.labels[i];
  }
  io::put_u32(out, static_cast<std::uint32_t>(block.size()));
  out.write(block.data(), static_cast<std::streamsize>(block.size()));
  io::put_f32(out, m.norm_stats.p95_u);
  io::put_f32(out, m.norm_stats.p95_v);
  io::put_u64(out, m.seed);

  auto put_layer = [&out](const std::vector<std::uint32_t>& descriptor,
                          const std::vector<const std::vector<double>*>& weights,
                          const std::vector<double>& biases) {
    io::put_u32(out, static_cast<std::uint32_t>(descriptor.size()));
    for (std::uint32_t d : descriptor) io::put_u32(out, d);
    for (const std::vector<double>* w : weights) {
      for (double v : *w) io::put_f32(out, static_cast<float>(v));
    }
    for (double v : biases) io::put_f32(out, static_cast<float>(v));
  };

  const ModelGeometry& g = m.geometry;
  {
    std::vector<const std::vector<double>*> w;
    for (const Tensor3& t : m.c1.weights) w.push_back(&t.values);
    put_layer(
        {static_cast<std::uint32_t>(g.c1_kernels),
         static_cast<std::uint32_t>(g.c1_kernel.rows),
         static_cast<std::uint32_t>(g.c1_kernel.cols),
         static_cast<std::uint32_t>(g.c1_kernel.depth),
         static_cast<std::uint32_t>(g.c1_stride.rows),
         static_cast<std::uint32_t>(g.c1_stride.cols),
         static_cast<std::uint32_t>(g.c1_stride.depth),
         static_cast<std::uint32_t>(g.p1_window.rows),
         static_cast<std::uint32_t>(g.p1_window.cols),
         static_cast<std::uint32_t>(g.p1_window.depth),
         static_cast<std::uint32_t>(g.p1_stride.rows),
         static_cast<std::uint32_t>(g.p1_stride.cols),
         static_cast<std::uint32_t>(g.p1_stride.depth),
         static_cast<std::uint32_t>(g.input.rows),
         static_cast<std::uint32_t>(g.input.cols),
         static_cast<std::uint32_t>(g.input.depth)},
        w, m.c1.biases);
  }
  {
    std::vector<const std::vector<double>*> w;
    for (const Tensor3& t : m.c2.weights) w.push_back(&t.values);
    put_layer({static_cast<std::uint32_t>(g.c2_kernels),
               static_cast<std::uint32_t>(g.c2_kernel),
               static_cast<std::uint32_t>(m.c2.in_channels),
               static_cast<std::uint32_t>(g.pool2_window),
               static_cast<std::uint32_t>(g.pool2_stride)},
              w, m.c2.biases);
  }
  for (const nn::DenseSpec* dense : {&m.fc1, &m.fc2, &m.classifier}) {
    put_layer({static_cast<std::uint32_t>(dense->out_size),
               static_cast<std::uint32_t>(dense->in_size)},
              {&dense->weights}, dense->biases);
  }
  if (!out) throw MissingInput("failed writing '" + path + "'");
}

inline NetworkModel load_model(const std::string& path) {
  std::ifstream in = io::open_for_read(path);
  io::expect_magic(in, "EGNT");
  const std::uint32_t version = io::get_u32(in, "version");
  if (version != 1) {
    throw FormatError("unsupported model file version " + std::to_string(version));
  }
  const std::uint32_t classes = io::get_u32(in, "class count");
  const std::uint32_t block_len = io::get_u32(in, "label block length");
  if (classes < 2 || block_len > (1u << 20)) {
    throw FormatError("implausible class count or label block length");
  }
  std::string block(block_len, '\0');
  io::read_exact(in, block.data(), block_len, "label block");

  NetworkModel m;
  std::size_t start = 0;
  while (true) {
    const std::size_t sep = block.find('\n', start);
    m.labels.push_back(block.substr(start, sep == std::string::npos
                                               ? std::string::npos
                                               : sep - start));
    if (sep == std::string::npos) break;
    start = sep + 1;
  }
  if (m.labels.size() != classes) {
    throw FormatError("label block holds " + std::to_string(m.labels.size()) +
                      " names, expected " + std::to_string(classes));
  }
  m.norm_stats.p95_u = io::get_f32(in, "p95_u");
  m.norm_stats.p95_v = io::get_f32(in, "p95_v");
  m.seed = io::get_u64(in, "seed");

  auto get_descriptor = [&in](std::size_t expected,
                              const char* layer) -> std::vector<std::uint32_t> {
    const std::uint32_t ndims = io::get_u32(in, "descriptor length");
    if (ndims != expected) {
      throw FormatError(std::string("layer ") + layer + " descriptor holds " +
                        std::to_string(ndims) + " fields, expected " +
                        std::to_string(expected));
    }
    std::vector<std::uint32_t> d(ndims);
    for (std::uint32_t& v : d) v = io::get_u32(in, "descriptor field");
    return d;
  };
  auto get_values = [&in](std::size_t n, const char* what) {
    std::vector<double> v(n);
    for (double& x : v) x = io::get_f32(in, what);
    return v;
  };
  auto positive = [](std::uint32_t v, const char* what) -> int {
    if (v == 0 || v > (1u << 24)) {
      throw FormatError(std::string("implausible ") + what + " in model file");
    }
    return static_cast<int>(v);
  };

  ModelGeometry& g = m.geometry;
  {
    const auto d = get_descriptor(16, "conv3d");
    g.c1_kernels = positive(d[0], "kernel count");
    g.c1_kernel = {positive(d[1], "kernel rows"), positive(d[2], "kernel cols"),
                   positive(d[3], "kernel depth")};
    g.c1_stride = {positive(d[4], "stride"), positive(d[5], "stride"),
                   positive(d[6], "stride")};
    g.p1_window = {positive(d[7], "pool window"), positive(d[8], "pool window"),
                   positive(d[9], "pool window")};
    g.p1_stride = {positive(d[10], "pool stride"), positive(d[11], "pool stride"),
                   positive(d[12], "pool stride")};
    g.input = {positive(d[13], "input rows"), positive(d[14], "input cols"),
               positive(d[15], "input depth")};
    m.c1.kernel_count = g.c1_kernels;
    m.c1.kernel_dims = g.c1_kernel;
    m.c1.stride = g.c1_stride;
    m.c1.weights.assign(g.c1_kernels, Tensor3(g.c1_kernel));
    for (Tensor3& t : m.c1.weights) {
      t.values = get_values(t.values.size(), "conv3d weights");
    }
    m.c1.biases = get_values(static_cast<std::size_t>(g.c1_kernels), "conv3d biases");
    m.p1 = nn::PoolSpec3D{g.p1_window, g.p1_stride};
  }
  {
    const auto d = get_descriptor(5, "conv2d");
    g.c2_kernels = positive(d[0], "kernel count");
    g.c2_kernel = positive(d[1], "kernel extent");
    m.c2.kernel_count = g.c2_kernels;
    m.c2.kernel_rows = g.c2_kernel;
    m.c2.kernel_cols = g.c2_kernel;
    m.c2.in_channels = positive(d[2], "channel count");
    g.pool2_window = positive(d[3], "pool window");
    g.pool2_stride = positive(d[4], "pool stride");
    m.c2.weights.assign(g.c2_kernels,
                        Tensor3(g.c2_kernel, g.c2_kernel, m.c2.in_channels));
    for (Tensor3& t : m.c2.weights) {
      t.values = get_values(t.values.size(), "conv2d weights");
    }
    m.c2.biases = get_values(static_cast<std::size_t>(g.c2_kernels), "conv2d biases");
  }
  auto read_dense = [&](const char* layer) {
    const auto d = get_descriptor(2, layer);
    nn::DenseSpec spec;
    spec.out_size = positive(d[0], "dense output width");
    spec.in_size = positive(d[1], "dense input width");
    spec.weights = get_values(
        static_cast<std::size_t>(spec.out_size) * spec.in_size, "dense weights");
    spec.biases = get_values(static_cast<std::size_t>(spec.out_size), "dense biases");
    return spec;
  };
  m.fc1 = read_dense("dense1");
  m.fc2 = read_dense("dense2");
  m.classifier = read_dense("classifier");
  g.fc1_out = m.fc1.out_size;
  g.fc2_out = m.fc2.out_size;
  io::expect_no_trailing(in, "EGNT");

  // Cross-validate the reconstructed geometry.
  ModelDims dims;
  try {
    dims = compute_dims(g);
  } catch (const Error& e) {
    throw FormatError(std::string("model file describes an invalid network: ") +
                      e.what());
  }
  if (m.c2.in_channels != dims.concat.depth || m.fc1.in_size != dims.flat ||
      m.fc2.in_size != m.fc1.out_size ||
      m.classifier.in_size != m.fc2.out_size ||
      m.classifier.out_size != static_cast<int>(classes)) {
    throw FormatError("model file layer shapes are inconsistent");
  }
  validate_labels(m.labels);
  return m;
}

}  // namespace egoflow
