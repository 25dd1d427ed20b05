#include <gtest/gtest.h>

#include "egoflow/gemm.hpp"

int main(int argc, char** argv) {
  egoflow::ensure_blas_core(argv);
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
