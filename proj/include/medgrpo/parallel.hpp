#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace medgrpo {

// Every parallel kernel also runs serially; tests pin the two paths to
// bit-identical outputs, so kernels must write disjoint slots and keep any
// reduction in fixed index order.
enum class ExecMode { kSerial, kParallel };

template <typename Fn>
void parallel_for(std::size_t n, ExecMode mode, Fn&& fn) {
  if (mode == ExecMode::kParallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      fn(static_cast<std::size_t>(i));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace medgrpo
