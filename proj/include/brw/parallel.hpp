#pragma once

// Deterministic parallel map: jobs are indexed, each job writes only its own
// slot, and reductions happen sequentially in index order after the join.
// Worker count is a throughput knob only; it can never change results.

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace brw {

inline void parallel_for(std::uint64_t jobs, int threads, const std::function<void(std::uint64_t)>& fn) {
    if (jobs == 0) return;
    if (threads <= 1 || jobs == 1) {
        for (std::uint64_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    unsigned int hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    auto nthreads = static_cast<std::uint64_t>(threads);
    if (nthreads > jobs) nthreads = jobs;
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::uint64_t w = 0; w < nthreads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= jobs || failed.load(std::memory_order_relaxed)) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace brw
