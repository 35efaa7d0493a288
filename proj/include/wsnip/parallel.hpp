#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace wsnip {

// WSNIP_THREADS when set, else the hardware concurrency (at least 1).
std::size_t thread_count();

// Calls body(i) for i in [0, n) on up to thread_count() threads. The first
// exception thrown (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wsnip
