#pragma once

#include <cstddef>
#include <functional>

namespace spartan {

// Worker count used inside ops. Defaults to 1; kernels partition work so that
// results are bitwise identical for any thread count.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Runs fn(i) for i in [0, count), splitting the range into contiguous chunks.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace spartan
