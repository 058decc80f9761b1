#pragma once

#include <cstddef>
#include <functional>

namespace xflex {

/// Worker count: XFLEX_THREADS if set and positive, else hardware concurrency.
std::size_t thread_budget();

/// Runs body(i) for i in [0, n) over up to thread_budget() threads. The first
/// exception thrown by any task is rethrown after all workers join. Calls made
/// from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace xflex
