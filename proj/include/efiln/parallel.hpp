#pragma once

#include <cstddef>
#include <functional>

namespace efiln {

/// Caps the worker count used by parallel_for (0 = hardware concurrency).
/// Results never depend on this value.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(task) for task in [0, n_tasks). Tasks are distributed over a
/// bounded set of workers; callers reduce per-task results in task order so
/// output is independent of the worker count.
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& body);

}  // namespace efiln
