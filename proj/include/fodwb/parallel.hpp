#pragma once

#include <cstddef>
#include <functional>

namespace fodwb {

// Worker count for parallel_for. 0 restores hardware concurrency.
void set_threads(int n);
int thread_count();

// Runs fn(begin, end) on disjoint index ranges covering [0, n). Each output
// slot is written by exactly one invocation, so results are independent of
// the worker count.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

// Convenience per-index form.
void parallel_for_each(size_t n, const std::function<void(size_t)>& fn);

}  // namespace fodwb
