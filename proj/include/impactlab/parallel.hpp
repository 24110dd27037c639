#pragma once

#include <cstddef>
#include <functional>

namespace impactlab {

/// Worker count: explicit value if > 0, else IMPACTLAB_THREADS, else the
/// hardware concurrency.
unsigned resolve_threads(unsigned requested = 0);

/// Calls body(i) for every i in [0, n). Each index runs exactly once; results
/// must go to per-index slots so the outcome does not depend on scheduling.
/// The first exception thrown by any body is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace impactlab
