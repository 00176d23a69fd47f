// parallel.hpp — Minimal index-parallel loop for sweep workloads.

#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace qme::par {

// Runs fn(i) for i in [0, n) on up to max_threads workers (0 = hardware
// concurrency). The first exception thrown by any worker is rethrown after
// all workers finish; callers write results into pre-sized slots so the
// output order is deterministic.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         int max_threads = 0) {
    if (n == 0) return;
    unsigned workers = max_threads > 0 ? static_cast<unsigned>(max_threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    bool expected = false;
                    if (failed.compare_exchange_strong(expected, true))
                        error = std::current_exception();
                    break;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace qme::par
