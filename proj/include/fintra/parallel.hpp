#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fintra {

// Runs fn(i) for every i in [0, n). With threads > 1 the indices are
// striped across worker threads; fn must only write to per-index slots, so
// the combined result never depends on the thread count.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nthreads = std::min(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nthreads) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace fintra
