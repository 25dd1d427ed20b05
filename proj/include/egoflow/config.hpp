// Pipeline defaults shared by the library and command-line front end.
#pragma once

#include <cstdint>

namespace egoflow {

struct PipelineConfig {
  double fps = 15.0;          // working frame rate after resampling
  int grid_rows = 32;
  int grid_cols = 32;
  int block_fields = 60;      // flow fields per volume (4 s)
  int block_stride = 30;      // fields between block starts (50% overlap)
  int eta = 21;               // temporal context window, blocks
  double learning_rate = 0.01;
  int batch_size = 64;
  int iterations = 3000;
  std::uint64_t seed = 0;
  int threads = 0;            // 0: EGOFLOW_THREADS or hardware concurrency
};

}  // namespace egoflow
