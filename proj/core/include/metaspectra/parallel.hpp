#pragma once

#include <cstddef>
#include <functional>

namespace msp {

// worker count: METASPECTRA_THREADS if set, else hardware concurrency
int thread_count();
void set_thread_count(int n);

// runs fn(i) for i in [0, n); order of completion unspecified
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace msp
