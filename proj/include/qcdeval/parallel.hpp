#pragma once

#include <cstddef>
#include <functional>

namespace qcdeval {

/// Number of workers when the caller does not specify one: the
/// QCD_EVAL_WORKERS environment variable if set, else hardware concurrency.
std::size_t default_workers();

/// Calls `body(i)` for every i in [0, n) using up to `workers` threads.
/// Indices are claimed dynamically; the body must only write to slots owned by
/// its index. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace qcdeval
