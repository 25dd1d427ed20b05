#include <gtest/gtest.h>

#include <cmath>

#include "egoflow/nn.hpp"
#include "egoflow/rng.hpp"
#include "egoflow/tensor.hpp"
#include "oracles.hpp"

using namespace egoflow;
using oracles::rel_diff;

TEST(Tensor3, DepthFastestLayout) {
  Tensor3 t(2, 3, 4);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.index(0, 0, 0), 0u);
  EXPECT_EQ(t.index(0, 0, 1), 1u);
  EXPECT_EQ(t.index(0, 1, 0), 4u);
  EXPECT_EQ(t.index(1, 0, 0), 12u);
  t.at(1, 2, 3) = 7.5;
  EXPECT_DOUBLE_EQ(t.values[23], 7.5);
}

TEST(Tensor3, RejectsNonPositiveDims) {
  EXPECT_THROW(Tensor3(0, 1, 1), ShapeError);
  EXPECT_THROW(Tensor3(1, -2, 1), ShapeError);
}

TEST(ConvMath, OutputExtent) {
  EXPECT_EQ(nn::conv_out_extent(32, 17, 2, "rows"), 8);
  EXPECT_EQ(nn::conv_out_extent(120, 20, 4, "depth"), 26);
  EXPECT_EQ(nn::conv_out_extent(5, 5, 3, "rows"), 1);
  EXPECT_THROW(nn::conv_out_extent(4, 5, 1, "rows"), ShapeError);
  EXPECT_THROW(nn::conv_out_extent(4, 2, 0, "rows"), ShapeError);
}

TEST(Conv3d, MatchesNaiveOracle) {
  Rng rng(2024, 0xC3);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims3 in{3 + static_cast<int>(rng.index(5)),
                   3 + static_cast<int>(rng.index(5)),
                   3 + static_cast<int>(rng.index(8))};
    const Tensor3 input = oracles::random_tensor(in, rng);
    const nn::ConvSpec3D spec = oracles::random_conv3d_spec(rng, in);

    const std::vector<Tensor3> got = nn::conv3d_forward(input, spec);
    const std::vector<Tensor3> want = oracles::naive_conv3d(input, spec);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      ASSERT_EQ(got[k].dims, want[k].dims);
      for (std::size_t i = 0; i < got[k].values.size(); ++i) {
        ASSERT_LT(rel_diff(got[k].values[i], want[k].values[i]), 1e-12)
            << "trial " << trial << " kernel " << k << " flat " << i;
      }
    }
  }
}

TEST(Conv3d, WorkspaceReuseIsTransparent) {
  Rng rng(55, 0xC4);
  nn::Conv3dWorkspace ws;
  for (int trial = 0; trial < 5; ++trial) {
    const Dims3 in{6, 6, 8};
    const Tensor3 input = oracles::random_tensor(in, rng);
    const nn::ConvSpec3D spec = oracles::random_conv3d_spec(rng, in);
    const std::vector<Tensor3> fresh = nn::conv3d_forward(input, spec);
    const std::vector<Tensor3> reused = nn::conv3d_forward(input, spec, &ws);
    for (std::size_t k = 0; k < fresh.size(); ++k) {
      EXPECT_EQ(fresh[k].values, reused[k].values);
    }
  }
}

TEST(Conv3d, RejectsGeometryMismatch) {
  nn::ConvSpec3D spec;
  spec.kernel_count = 1;
  spec.kernel_dims = {3, 3, 3};
  spec.stride = {1, 1, 1};
  spec.weights.emplace_back(3, 3, 3);
  spec.biases.push_back(0.0);
  const Tensor3 small(2, 2, 2);
  EXPECT_THROW(nn::conv3d_forward(small, spec), ShapeError);
}

TEST(Conv2d, MatchesNaiveOracle) {
  Rng rng(77, 0xC5);
  for (int trial = 0; trial < 100; ++trial) {
    const int channels = 1 + static_cast<int>(rng.index(4));
    const Dims3 in{3 + static_cast<int>(rng.index(5)),
                   3 + static_cast<int>(rng.index(5)), channels};
    const Tensor3 input = oracles::random_tensor(in, rng);

    nn::ConvSpec2D spec;
    spec.kernel_count = 1 + static_cast<int>(rng.index(3));
    spec.kernel_rows = 1 + static_cast<int>(rng.index(3));
    spec.kernel_cols = 1 + static_cast<int>(rng.index(3));
    spec.in_channels = channels;
    for (int k = 0; k < spec.kernel_count; ++k) {
      spec.weights.push_back(oracles::random_tensor(
          Dims3{spec.kernel_rows, spec.kernel_cols, channels}, rng));
      spec.biases.push_back(rng.uniform(-0.5, 0.5));
    }

    const Tensor3 got = nn::conv2d_forward(input, spec);
    const Tensor3 want = oracles::naive_conv2d(input, spec);
    ASSERT_EQ(got.dims, want.dims);
    for (std::size_t i = 0; i < got.values.size(); ++i) {
      ASSERT_LT(rel_diff(got.values[i], want.values[i]), 1e-12);
    }
  }
}

TEST(Pool3d, MatchesNaiveOracle) {
  Rng rng(99, 0xC6);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims3 win{1 + static_cast<int>(rng.index(3)),
                    1 + static_cast<int>(rng.index(3)),
                    1 + static_cast<int>(rng.index(4))};
    const Dims3 in{win.rows * (1 + static_cast<int>(rng.index(3))),
                   win.cols * (1 + static_cast<int>(rng.index(3))),
                   win.depth * (1 + static_cast<int>(rng.index(3)))};
    const Tensor3 input = oracles::random_tensor(in, rng);
    const nn::PoolSpec3D spec{win, win};

    const nn::Pool3dResult got = nn::maxpool3d_forward(input, spec);
    const Tensor3 want = oracles::naive_pool3d(input, spec);
    ASSERT_EQ(got.output.dims, want.dims);
    for (std::size_t i = 0; i < want.values.size(); ++i) {
      ASSERT_DOUBLE_EQ(got.output.values[i], want.values[i]);
      // argmax must point at a cell holding the max value
      ASSERT_DOUBLE_EQ(input.values[got.argmax[i]], want.values[i]);
    }
  }
}

TEST(Pool3d, TieBreaksToLowestFlatIndex) {
  Tensor3 input(2, 2, 2);
  for (double& v : input.values) v = 3.25;
  const nn::PoolSpec3D spec{{2, 2, 2}, {2, 2, 2}};
  const nn::Pool3dResult r = nn::maxpool3d_forward(input, spec);
  ASSERT_EQ(r.argmax.size(), 1u);
  EXPECT_EQ(r.argmax[0], 0u);
}

TEST(Pool3d, StrictTilingRejectsPartialWindows) {
  const nn::PoolSpec3D spec{{2, 2, 2}, {2, 2, 2}};
  EXPECT_THROW(nn::pool3d_output_dims(Dims3{5, 4, 4}, spec, true), ShapeError);
  EXPECT_NO_THROW(nn::pool3d_output_dims(Dims3{4, 4, 4}, spec, true));
}

TEST(Pool3d, BackwardRoutesToArgmax) {
  Rng rng(3, 0xC7);
  const Tensor3 input = oracles::random_tensor(Dims3{4, 4, 6}, rng);
  const nn::PoolSpec3D spec{{2, 2, 3}, {2, 2, 3}};
  const nn::Pool3dResult fwd = nn::maxpool3d_forward(input, spec);
  Tensor3 upstream(fwd.output.dims.rows, fwd.output.dims.cols,
                   fwd.output.dims.depth);
  for (double& v : upstream.values) v = rng.uniform(-1.0, 1.0);
  const Tensor3 grad = nn::maxpool3d_backward(input.dims, fwd, upstream);

  double upstream_sum = 0.0, grad_sum = 0.0;
  for (double v : upstream.values) upstream_sum += v;
  for (double v : grad.values) grad_sum += v;
  EXPECT_NEAR(upstream_sum, grad_sum, 1e-12);
  for (std::size_t i = 0; i < upstream.values.size(); ++i) {
    EXPECT_DOUBLE_EQ(grad.values[fwd.argmax[i]], upstream.values[i]);
  }
}

TEST(Dense, MatchesNaiveOracle) {
  Rng rng(14, 0xC8);
  for (int trial = 0; trial < 100; ++trial) {
    nn::DenseSpec spec;
    spec.in_size = 1 + static_cast<int>(rng.index(20));
    spec.out_size = 1 + static_cast<int>(rng.index(20));
    spec.weights = oracles::random_vector(
        static_cast<std::size_t>(spec.in_size) * spec.out_size, rng);
    spec.biases = oracles::random_vector(static_cast<std::size_t>(spec.out_size),
                                         rng);
    const std::vector<double> x =
        oracles::random_vector(static_cast<std::size_t>(spec.in_size), rng);
    const std::vector<double> got = nn::dense_forward(spec, x);
    const std::vector<double> want = oracles::naive_dense(x, spec);
    for (std::size_t i = 0; i < want.size(); ++i) {
      ASSERT_LT(rel_diff(got[i], want[i]), 1e-12);
    }
  }
}

TEST(Softmax, MatchesExtendedPrecisionOracle) {
  Rng rng(21, 0xC9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> logits =
        oracles::random_vector(2 + rng.index(9), rng, 10.0);
    const std::vector<double> probs = nn::softmax(logits);
    const std::vector<double> want = oracles::naive_softmax(logits);
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      ASSERT_LT(rel_diff(probs[i], want[i]), 1e-12);
      sum += probs[i];
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Softmax, StableOnExtremeLogits) {
  const std::vector<double> logits{1000.0, 1000.0, -1000.0};
  const std::vector<double> probs = nn::softmax(logits);
  EXPECT_NEAR(probs[0], 0.5, 1e-12);
  EXPECT_NEAR(probs[1], 0.5, 1e-12);
  EXPECT_GE(probs[2], 0.0);
  const std::vector<double> empty;
  EXPECT_THROW(nn::softmax(empty), ShapeError);
}

TEST(Relu, GateIsClosedAtZero) {
  std::vector<double> pre{-1.0, 0.0, 2.5};
  const std::vector<double> act = nn::relu_forward(pre);
  EXPECT_DOUBLE_EQ(act[0], 0.0);
  EXPECT_DOUBLE_EQ(act[1], 0.0);
  EXPECT_DOUBLE_EQ(act[2], 2.5);
  const std::vector<double> grad = nn::relu_backward(pre, {1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(grad[0], 0.0);
  EXPECT_DOUBLE_EQ(grad[1], 0.0);  // non-differentiable point: subgradient 0
  EXPECT_DOUBLE_EQ(grad[2], 1.0);
}

TEST(CrossEntropy, LossAndGradient) {
  const std::vector<double> logits{0.2, 1.4, -0.7};
  const std::vector<double> probs = nn::softmax(logits);
  const nn::CrossEntropyResult r = nn::cross_entropy(probs, 1);
  EXPECT_NEAR(r.loss, -std::log(probs[1]), 1e-15);
  EXPECT_NEAR(r.logit_grad[0], probs[0], 1e-15);
  EXPECT_NEAR(r.logit_grad[1], probs[1] - 1.0, 1e-15);
  EXPECT_NEAR(r.logit_grad[2], probs[2], 1e-15);
  EXPECT_THROW(nn::cross_entropy(probs, 3), LabelError);
  EXPECT_THROW(nn::cross_entropy(probs, -1), LabelError);
}

TEST(Xavier, BoundsAndDeterminism) {
  const int fan_in = 30, fan_out = 50;
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  const std::vector<double> a = nn::xavier_init(fan_in, fan_out, 42, 5000);
  const std::vector<double> b = nn::xavier_init(fan_in, fan_out, 42, 5000);
  const std::vector<double> c = nn::xavier_init(fan_in, fan_out, 43, 5000);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  double lo = 0.0, hi = 0.0;
  for (double v : a) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, -bound);
  EXPECT_LE(hi, bound);
  EXPECT_LT(lo, -0.5 * bound);  // spread actually fills the range
  EXPECT_GT(hi, 0.5 * bound);
}

TEST(Sgd, StepSubtractsScaledGradient) {
  std::vector<double> params{1.0, -2.0, 0.5};
  const std::vector<double> grads{0.5, -1.0, 0.0};
  nn::sgd_step(params, grads, 0.1);
  EXPECT_DOUBLE_EQ(params[0], 0.95);
  EXPECT_DOUBLE_EQ(params[1], -1.9);
  EXPECT_DOUBLE_EQ(params[2], 0.5);
}
