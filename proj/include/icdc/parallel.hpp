#ifndef ICDC_PARALLEL_HPP
#define ICDC_PARALLEL_HPP

#ifdef _OPENMP
#include <omp.h>
#endif

namespace icdc {

/// Runs fn(i) for i in [0, n). workers == 1 uses the serial reference
/// path; workers == 0 uses the hardware default. Work items must be
/// independent; callers seed per-item RNGs up front so results do not
/// depend on the worker count.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
#ifdef _OPENMP
  if (workers != 1) {
    if (workers > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
      for (int i = 0; i < n; ++i) fn(i);
    } else {
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < n; ++i) fn(i);
    }
    return;
  }
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace icdc

#endif
