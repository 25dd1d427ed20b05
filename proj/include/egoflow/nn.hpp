// Neural-network primitives: valid (no-padding) 3D/2D convolution, max
// pooling with argmax bookkeeping, dense layers, ReLU, softmax with
// cross-entropy, Xavier initialization and plain SGD.
//
// Convolution layout convention: inputs are single-channel Tensor3 volumes in
// (row, col, depth) order; conv3d applies K independent kernels and yields K
// output maps.  conv2d treats the tensor depth axis as input channels and its
// kernels span all of them, producing one output map per kernel stacked along
// the depth axis.
//
// conv3d dominates runtime, so its forward/weight-gradient paths are cast as
// matrix products: rows of a patch matrix enumerate output positions, columns
// enumerate kernel support.  Patch rows are built with contiguous memcpy runs
// (the depth axis is innermost) and both products map onto one GEMM each.
// The patch matrix can be reused between forward and backward through an
// optional workspace.  Everything else is small and uses plain loops.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "egoflow/errors.hpp"
#include "egoflow/gemm.hpp"
#include "egoflow/rng.hpp"
#include "egoflow/tensor.hpp"

namespace egoflow::nn {

// Output extent of a valid convolution/pooling axis: floor((in - k) / s) + 1.
inline int conv_out_extent(int in, int k, int s, const char* axis) {
  if (k <= 0 || s <= 0) {
    throw ShapeError(std::string("kernel and stride must be positive on ") + axis);
  }
  if (k > in) {
    throw ShapeError(std::string("kernel exceeds input on ") + axis + ": " +
                     std::to_string(k) + " > " + std::to_string(in));
  }
  return (in - k) / s + 1;
}

// ---------------------------------------------------------------------------
// 3D convolution

struct ConvSpec3D {
  int kernel_count = 0;
  Dims3 kernel_dims;
  Dims3 stride{1, 1, 1};
  std::vector<Tensor3> weights;  // kernel_count tensors of kernel_dims
  std::vector<double> biases;    // kernel_count
};

inline Dims3 conv3d_output_dims(const Dims3& in, const ConvSpec3D& spec) {
  return Dims3{
      conv_out_extent(in.rows, spec.kernel_dims.rows, spec.stride.rows, "rows"),
      conv_out_extent(in.cols, spec.kernel_dims.cols, spec.stride.cols, "cols"),
      conv_out_extent(in.depth, spec.kernel_dims.depth, spec.stride.depth, "depth")};
}

inline void validate_conv3d(const Dims3& in, const ConvSpec3D& spec) {
  if (spec.kernel_count <= 0) throw ShapeError("kernel_count must be positive");
  if (spec.weights.size() != static_cast<std::size_t>(spec.kernel_count) ||
      spec.biases.size() != static_cast<std::size_t>(spec.kernel_count)) {
    throw ShapeError("conv3d weights/biases do not match kernel_count");
  }
  for (const Tensor3& w : spec.weights) {
    if (!(w.dims == spec.kernel_dims)) {
      throw ShapeError("conv3d kernel tensor has dims " + w.dims.str() +
                       ", expected " + spec.kernel_dims.str());
    }
  }
  (void)in;
}

// Scratch buffers reusable across conv3d calls.  After a forward pass the
// patch matrix `bt` describes that input; backward reuses it when the caller
// passes the same workspace.
struct Conv3dWorkspace {
  std::vector<double> bt;     // out.count() x kernel support
  std::vector<double> wmat;   // kernel support x kernel_count
  std::vector<double> ybuf;   // out.count() x kernel_count
  std::vector<double> gbuf;   // out.count() x kernel_count
  std::vector<double> dwbuf;  // kernel support x kernel_count
  Dims3 in_dims{}, out_dims{};
  bool has_gather = false;
};

namespace detail3d {

inline void gather_patches(const Tensor3& in, const ConvSpec3D& spec,
                           const Dims3& out, std::vector<double>& bt) {
  const int kr = spec.kernel_dims.rows;
  const int kc = spec.kernel_dims.cols;
  const int kd = spec.kernel_dims.depth;
  const int sr = spec.stride.rows, sc = spec.stride.cols, sd = spec.stride.depth;
  const std::size_t group = spec.kernel_dims.count();
  bt.resize(out.count() * group);
  const int in_cols = in.dims.cols, in_depth = in.dims.depth;
  double* row = bt.data();
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      for (int d = 0; d < out.depth; ++d) {
        double* dst = row;
        for (int i = 0; i < kr; ++i) {
          const double* src =
              in.data() +
              (static_cast<std::size_t>(r * sr + i) * in_cols + c * sc) * in_depth +
              d * sd;
          for (int j = 0; j < kc; ++j) {
            std::memcpy(dst, src, sizeof(double) * kd);
            dst += kd;
            src += in_depth;
          }
        }
        row += group;
      }
    }
  }
}

inline void pack_weights(const ConvSpec3D& spec, std::vector<double>& wmat) {
  const int kn = spec.kernel_count;
  const std::size_t group = spec.kernel_dims.count();
  wmat.resize(group * kn);
  for (int k = 0; k < kn; ++k) {
    const double* src = spec.weights[k].data();
    double* dst = wmat.data() + k;
    for (std::size_t g = 0; g < group; ++g) dst[g * kn] = src[g];
  }
}

}  // namespace detail3d

inline std::vector<Tensor3> conv3d_forward(const Tensor3& input,
                                           const ConvSpec3D& spec,
                                           Conv3dWorkspace* ws = nullptr) {
  validate_conv3d(input.dims, spec);
  const Dims3 out = conv3d_output_dims(input.dims, spec);
  Conv3dWorkspace local;
  Conv3dWorkspace& w = ws ? *ws : local;

  detail3d::gather_patches(input, spec, out, w.bt);
  w.in_dims = input.dims;
  w.out_dims = out;
  w.has_gather = true;
  detail3d::pack_weights(spec, w.wmat);

  const int kn = spec.kernel_count;
  const std::size_t group = spec.kernel_dims.count();
  const std::size_t np = out.count();
  w.ybuf.resize(np * kn);
  egoflow::detail::dgemm(false, static_cast<int>(np), kn, static_cast<int>(group),
                         1.0, w.bt.data(), static_cast<int>(group), w.wmat.data(),
                         kn, 0.0, w.ybuf.data(), kn);

  std::vector<Tensor3> maps(kn, Tensor3(out));
  for (int k = 0; k < kn; ++k) {
    double* dst = maps[k].data();
    const double* src = w.ybuf.data() + k;
    const double bias = spec.biases[k];
    for (std::size_t p = 0; p < np; ++p) dst[p] = src[p * kn] + bias;
  }
  return maps;
}

struct Conv3dGrads {
  std::vector<Tensor3> weight_grads;
  std::vector<double> bias_grads;
  Tensor3 input_grad;
  bool has_input_grad = false;
};

// `upstream` holds dLoss/dOutput per kernel map.  The input gradient is only
// produced on request: the first layer of a network never needs it.
inline Conv3dGrads conv3d_backward(const Tensor3& input, const ConvSpec3D& spec,
                                   const std::vector<Tensor3>& upstream,
                                   bool need_input_grad = true,
                                   Conv3dWorkspace* ws = nullptr) {
  validate_conv3d(input.dims, spec);
  const Dims3 out = conv3d_output_dims(input.dims, spec);
  const int kn = spec.kernel_count;
  if (upstream.size() != static_cast<std::size_t>(kn)) {
    throw ShapeError("conv3d upstream map count mismatch");
  }
  for (const Tensor3& u : upstream) {
    if (!(u.dims == out)) {
      throw ShapeError("conv3d upstream dims " + u.dims.str() + ", expected " +
                       out.str());
    }
  }

  Conv3dWorkspace local;
  Conv3dWorkspace& w = ws ? *ws : local;
  const std::size_t group = spec.kernel_dims.count();
  const std::size_t np = out.count();
  if (!(w.has_gather && w.in_dims == input.dims && w.out_dims == out &&
        w.bt.size() == np * group)) {
    detail3d::gather_patches(input, spec, out, w.bt);
    w.in_dims = input.dims;
    w.out_dims = out;
    w.has_gather = true;
  }

  w.gbuf.resize(np * kn);
  for (int k = 0; k < kn; ++k) {
    const double* src = upstream[k].data();
    double* dst = w.gbuf.data() + k;
    for (std::size_t p = 0; p < np; ++p) dst[p * kn] = src[p];
  }
  w.dwbuf.resize(group * kn);
  egoflow::detail::dgemm(true, static_cast<int>(group), kn, static_cast<int>(np),
                         1.0, w.bt.data(), static_cast<int>(group), w.gbuf.data(),
                         kn, 0.0, w.dwbuf.data(), kn);

  Conv3dGrads grads;
  grads.weight_grads.assign(kn, Tensor3(spec.kernel_dims));
  grads.bias_grads.assign(kn, 0.0);
  for (int k = 0; k < kn; ++k) {
    double* dst = grads.weight_grads[k].data();
    const double* src = w.dwbuf.data() + k;
    for (std::size_t g = 0; g < group; ++g) dst[g] = src[g * kn];
    const double* up = upstream[k].data();
    grads.bias_grads[k] = std::accumulate(up, up + np, 0.0);
  }

  if (need_input_grad) {
    grads.input_grad = Tensor3(input.dims);
    grads.has_input_grad = true;
    const int kr = spec.kernel_dims.rows;
    const int kc = spec.kernel_dims.cols;
    const int kd = spec.kernel_dims.depth;
    const int sr = spec.stride.rows, sc = spec.stride.cols, sd = spec.stride.depth;
    for (int k = 0; k < kn; ++k) {
      const Tensor3& wk = spec.weights[k];
      const Tensor3& up = upstream[k];
      for (int r = 0; r < out.rows; ++r) {
        for (int c = 0; c < out.cols; ++c) {
          for (int d = 0; d < out.depth; ++d) {
            const double u = up.at(r, c, d);
            if (u == 0.0) continue;
            for (int i = 0; i < kr; ++i) {
              for (int j = 0; j < kc; ++j) {
                for (int l = 0; l < kd; ++l) {
                  grads.input_grad.at(r * sr + i, c * sc + j, d * sd + l) +=
                      wk.at(i, j, l) * u;
                }
              }
            }
          }
        }
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// 2D convolution over (rows, cols) with the depth axis as input channels.
// Used after the per-kernel pooled maps are concatenated along depth.

struct ConvSpec2D {
  int kernel_count = 0;
  int kernel_rows = 0;
  int kernel_cols = 0;
  int in_channels = 0;
  int stride_rows = 1;
  int stride_cols = 1;
  std::vector<Tensor3> weights;  // kernel_count tensors (kr, kc, in_channels)
  std::vector<double> biases;
};

inline Dims3 conv2d_output_dims(const Dims3& in, const ConvSpec2D& spec) {
  if (in.depth != spec.in_channels) {
    throw ShapeError("conv2d expects " + std::to_string(spec.in_channels) +
                     " input channels, got " + std::to_string(in.depth));
  }
  return Dims3{conv_out_extent(in.rows, spec.kernel_rows, spec.stride_rows, "rows"),
               conv_out_extent(in.cols, spec.kernel_cols, spec.stride_cols, "cols"),
               spec.kernel_count};
}

inline void validate_conv2d(const ConvSpec2D& spec) {
  if (spec.kernel_count <= 0) throw ShapeError("kernel_count must be positive");
  if (spec.weights.size() != static_cast<std::size_t>(spec.kernel_count) ||
      spec.biases.size() != static_cast<std::size_t>(spec.kernel_count)) {
    throw ShapeError("conv2d weights/biases do not match kernel_count");
  }
  const Dims3 want{spec.kernel_rows, spec.kernel_cols, spec.in_channels};
  for (const Tensor3& w : spec.weights) {
    if (!(w.dims == want)) {
      throw ShapeError("conv2d kernel tensor has dims " + w.dims.str() +
                       ", expected " + want.str());
    }
  }
}

inline Tensor3 conv2d_forward(const Tensor3& input, const ConvSpec2D& spec) {
  validate_conv2d(spec);
  const Dims3 out = conv2d_output_dims(input.dims, spec);
  Tensor3 result(out);
  const int ch = spec.in_channels;
  for (int k = 0; k < spec.kernel_count; ++k) {
    const Tensor3& wk = spec.weights[k];
    for (int r = 0; r < out.rows; ++r) {
      for (int c = 0; c < out.cols; ++c) {
        double acc = spec.biases[k];
        for (int i = 0; i < spec.kernel_rows; ++i) {
          const int rr = r * spec.stride_rows + i;
          for (int j = 0; j < spec.kernel_cols; ++j) {
            const int cc = c * spec.stride_cols + j;
            const double* in_px = input.data() + input.index(rr, cc, 0);
            const double* w_px = wk.data() + wk.index(i, j, 0);
            for (int l = 0; l < ch; ++l) acc += in_px[l] * w_px[l];
          }
        }
        result.at(r, c, k) = acc;
      }
    }
  }
  return result;
}

struct Conv2dGrads {
  std::vector<Tensor3> weight_grads;
  std::vector<double> bias_grads;
  Tensor3 input_grad;
};

inline Conv2dGrads conv2d_backward(const Tensor3& input, const ConvSpec2D& spec,
                                   const Tensor3& upstream) {
  validate_conv2d(spec);
  const Dims3 out = conv2d_output_dims(input.dims, spec);
  if (!(upstream.dims == out)) {
    throw ShapeError("conv2d upstream dims " + upstream.dims.str() +
                     ", expected " + out.str());
  }
  Conv2dGrads grads;
  grads.weight_grads.assign(spec.kernel_count,
                            Tensor3(spec.kernel_rows, spec.kernel_cols, spec.in_channels));
  grads.bias_grads.assign(spec.kernel_count, 0.0);
  grads.input_grad = Tensor3(input.dims);
  const int ch = spec.in_channels;
  for (int k = 0; k < spec.kernel_count; ++k) {
    Tensor3& dwk = grads.weight_grads[k];
    const Tensor3& wk = spec.weights[k];
    double db = 0.0;
    for (int r = 0; r < out.rows; ++r) {
      for (int c = 0; c < out.cols; ++c) {
        const double u = upstream.at(r, c, k);
        if (u == 0.0) continue;
        db += u;
        for (int i = 0; i < spec.kernel_rows; ++i) {
          const int rr = r * spec.stride_rows + i;
          for (int j = 0; j < spec.kernel_cols; ++j) {
            const int cc = c * spec.stride_cols + j;
            const double* in_px = input.data() + input.index(rr, cc, 0);
            double* dw_px = dwk.data() + dwk.index(i, j, 0);
            const double* w_px = wk.data() + wk.index(i, j, 0);
            double* di_px = grads.input_grad.data() + grads.input_grad.index(rr, cc, 0);
            for (int l = 0; l < ch; ++l) {
              dw_px[l] += in_px[l] * u;
              di_px[l] += w_px[l] * u;
            }
          }
        }
      }
    }
    grads.bias_grads[k] = db;
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Max pooling

struct PoolSpec3D {
  Dims3 window;
  Dims3 stride;
};

struct Pool3dResult {
  Tensor3 output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

inline Dims3 pool3d_output_dims(const Dims3& in, const PoolSpec3D& spec,
                                bool strict_tiling = false) {
  if (strict_tiling) {
    auto aligned = [](int extent, int w, int s) {
      return w > 0 && s > 0 && extent >= w && (extent - w) % s == 0;
    };
    if (!aligned(in.rows, spec.window.rows, spec.stride.rows) ||
        !aligned(in.cols, spec.window.cols, spec.stride.cols) ||
        !aligned(in.depth, spec.window.depth, spec.stride.depth)) {
      throw ShapeError("pool window " + spec.window.str() + " stride " +
                       spec.stride.str() + " does not tile input " + in.str());
    }
  }
  return Dims3{
      conv_out_extent(in.rows, spec.window.rows, spec.stride.rows, "rows"),
      conv_out_extent(in.cols, spec.window.cols, spec.stride.cols, "cols"),
      conv_out_extent(in.depth, spec.window.depth, spec.stride.depth, "depth")};
}

// Ties keep the first maximum in (row, col, depth) scan order, i.e. the
// lowest flat index; backward routes gradient only to that element.
inline Pool3dResult maxpool3d_forward(const Tensor3& input, const PoolSpec3D& spec,
                                      bool strict_tiling = false) {
  const Dims3 out = pool3d_output_dims(input.dims, spec, strict_tiling);
  Pool3dResult result{Tensor3(out), {}};
  result.argmax.resize(out.count());
  std::size_t flat = 0;
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      for (int d = 0; d < out.depth; ++d, ++flat) {
        double best = -std::numeric_limits<double>::infinity();
        std::uint32_t best_idx = 0;
        for (int i = 0; i < spec.window.rows; ++i) {
          for (int j = 0; j < spec.window.cols; ++j) {
            for (int l = 0; l < spec.window.depth; ++l) {
              const std::size_t idx = input.index(r * spec.stride.rows + i,
                                                  c * spec.stride.cols + j,
                                                  d * spec.stride.depth + l);
              const double v = input.values[idx];
              if (v > best) {
                best = v;
                best_idx = static_cast<std::uint32_t>(idx);
              }
            }
          }
        }
        result.output.values[flat] = best;
        result.argmax[flat] = best_idx;
      }
    }
  }
  return result;
}

inline Tensor3 maxpool3d_backward(const Dims3& input_dims, const Pool3dResult& fwd,
                                  const Tensor3& upstream) {
  if (!(upstream.dims == fwd.output.dims)) {
    throw ShapeError("pool upstream dims " + upstream.dims.str() + ", expected " +
                     fwd.output.dims.str());
  }
  Tensor3 grad(input_dims);
  for (std::size_t p = 0; p < fwd.argmax.size(); ++p) {
    grad.values[fwd.argmax[p]] += upstream.values[p];
  }
  return grad;
}

// 2D pooling over (rows, cols), independent per channel.
inline Pool3dResult maxpool2d_forward(const Tensor3& input, int window, int stride,
                                      bool strict_tiling = false) {
  return maxpool3d_forward(
      input, PoolSpec3D{{window, window, 1}, {stride, stride, 1}}, strict_tiling);
}

inline Tensor3 maxpool2d_backward(const Dims3& input_dims, const Pool3dResult& fwd,
                                  const Tensor3& upstream) {
  return maxpool3d_backward(input_dims, fwd, upstream);
}

// ---------------------------------------------------------------------------
// Dense layer

struct DenseSpec {
  int in_size = 0;
  int out_size = 0;
  std::vector<double> weights;  // out_size x in_size, row-major
  std::vector<double> biases;   // out_size
};

inline void validate_dense(const DenseSpec& spec) {
  if (spec.in_size <= 0 || spec.out_size <= 0) {
    throw ShapeError("dense layer sizes must be positive");
  }
  if (spec.weights.size() !=
          static_cast<std::size_t>(spec.in_size) * spec.out_size ||
      spec.biases.size() != static_cast<std::size_t>(spec.out_size)) {
    throw ShapeError("dense weight/bias storage does not match layer sizes");
  }
}

inline std::vector<double> dense_forward(const DenseSpec& spec,
                                         const std::vector<double>& x) {
  validate_dense(spec);
  if (x.size() != static_cast<std::size_t>(spec.in_size)) {
    throw ShapeError("dense input size " + std::to_string(x.size()) +
                     ", expected " + std::to_string(spec.in_size));
  }
  std::vector<double> y(spec.out_size);
  for (int o = 0; o < spec.out_size; ++o) {
    const double* row = spec.weights.data() + static_cast<std::size_t>(o) * spec.in_size;
    double acc = spec.biases[o];
    for (int i = 0; i < spec.in_size; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
  return y;
}

struct DenseGrads {
  std::vector<double> weight_grads;
  std::vector<double> bias_grads;
  std::vector<double> input_grad;
};

inline DenseGrads dense_backward(const DenseSpec& spec, const std::vector<double>& x,
                                 const std::vector<double>& upstream) {
  validate_dense(spec);
  if (x.size() != static_cast<std::size_t>(spec.in_size) ||
      upstream.size() != static_cast<std::size_t>(spec.out_size)) {
    throw ShapeError("dense backward input/upstream size mismatch");
  }
  DenseGrads grads;
  grads.weight_grads.resize(spec.weights.size());
  grads.bias_grads = upstream;
  grads.input_grad.assign(spec.in_size, 0.0);
  for (int o = 0; o < spec.out_size; ++o) {
    const double u = upstream[o];
    const double* wrow = spec.weights.data() + static_cast<std::size_t>(o) * spec.in_size;
    double* dwrow = grads.weight_grads.data() + static_cast<std::size_t>(o) * spec.in_size;
    for (int i = 0; i < spec.in_size; ++i) {
      dwrow[i] = x[i] * u;
      grads.input_grad[i] += wrow[i] * u;
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Activations and loss

inline void relu_inplace(std::span<double> values) {
  for (double& v : values) v = v > 0.0 ? v : 0.0;
}

inline std::vector<double> relu_forward(std::vector<double> values) {
  relu_inplace(values);
  return values;
}

inline Tensor3 relu_forward(Tensor3 t) {
  relu_inplace(t.values);
  return t;
}

// Gradient w.r.t. pre-activation; the subgradient at exactly 0 is 0.
inline std::vector<double> relu_backward(const std::vector<double>& pre,
                                         const std::vector<double>& upstream) {
  if (pre.size() != upstream.size()) {
    throw ShapeError("relu backward size mismatch");
  }
  std::vector<double> grad(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    grad[i] = pre[i] > 0.0 ? upstream[i] : 0.0;
  }
  return grad;
}

inline Tensor3 relu_backward(const Tensor3& pre, const Tensor3& upstream) {
  if (!(pre.dims == upstream.dims)) {
    throw ShapeError("relu backward dims mismatch");
  }
  Tensor3 grad(pre.dims);
  for (std::size_t i = 0; i < pre.values.size(); ++i) {
    grad.values[i] = pre.values[i] > 0.0 ? upstream.values[i] : 0.0;
  }
  return grad;
}

// Numerically-stable softmax (max subtraction before exponentiation).
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax needs at least one logit");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - peak);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<double> logit_grad;  // gradient w.r.t. the softmax inputs
};

// `probs` must be a softmax output; the logit gradient probs - onehot(label)
// relies on that.
inline CrossEntropyResult cross_entropy(const std::vector<double>& probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw LabelError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(probs.size()) + " classes");
  }
  CrossEntropyResult result;
  result.loss = -std::log(probs[label]);
  result.logit_grad = probs;
  result.logit_grad[label] -= 1.0;
  return result;
}

// ---------------------------------------------------------------------------
// Initialization and optimization

// Xavier/Glorot uniform: bound = sqrt(6 / (fan_in + fan_out)).
inline std::vector<double> xavier_init(int fan_in, int fan_out,
                                       std::uint64_t rng_seed, std::size_t count) {
  if (fan_in <= 0 || fan_out <= 0) {
    throw ShapeError("xavier_init fans must be positive");
  }
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Rng rng(rng_seed);
  std::vector<double> weights(count);
  for (double& w : weights) w = rng.uniform(-bound, bound);
  return weights;
}

inline void sgd_step(std::span<double> params, std::span<const double> grads,
                     double learning_rate) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step parameter/gradient size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= learning_rate * grads[i];
  }
}

}  // namespace egoflow::nn
