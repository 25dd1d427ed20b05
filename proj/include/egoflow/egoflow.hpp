// Umbrella header: sparse grid optical flow over video frames, flow-volume
// construction, a compact 3D convolutional classifier trained from scratch,
// temporal activity segmentation, and analysis/visualization utilities.
#pragma once

#include "egoflow/analysis.hpp"
#include "egoflow/config.hpp"
#include "egoflow/errors.hpp"
#include "egoflow/flow.hpp"
#include "egoflow/frame.hpp"
#include "egoflow/gemm.hpp"
#include "egoflow/io.hpp"
#include "egoflow/network.hpp"
#include "egoflow/nn.hpp"
#include "egoflow/parallel.hpp"
#include "egoflow/rng.hpp"
#include "egoflow/segmenter.hpp"
#include "egoflow/synthetic.hpp"
#include "egoflow/tensor.hpp"
#include "egoflow/volume.hpp"
