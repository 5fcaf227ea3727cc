#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ipsi {

// threads == 0 means "use all hardware threads"; 1 selects the serial
// reference path. Every parallel kernel in this library writes each
// iteration's result to its own slot and reduces in index order, so the
// output is bit-identical for any thread count — the serial path is the
// reference the OpenMP path is tested against.
inline int resolve_threads(int requested) {
#ifdef _OPENMP
  if (requested <= 0) return omp_get_max_threads();
  return requested;
#else
  (void)requested;
  return 1;
#endif
}

template <class Body>
void parallel_for(std::int64_t n, int threads, Body&& body) {
  threads = resolve_threads(threads);
#ifdef _OPENMP
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace ipsi
