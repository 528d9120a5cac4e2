// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/blas.hpp"

#include <cstdlib>

// Present in OpenBLAS; resolves to null under other BLAS implementations.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace cinemagen::detail {

void blas_init_single_thread() {
  static const bool done = [] {
    // The env var covers backends initialized before the first call.
    setenv("OPENBLAS_NUM_THREADS", "1", 0);
    setenv("OMP_NUM_THREADS", "1", 0);
    if (openblas_set_num_threads) openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
}

}  // namespace cinemagen::detail
