#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace unipcb {

/// Evaluates fn(i) for every i in [0, n) across a small thread pool and
/// returns results in index order, independent of scheduling. Work items
/// must derive any randomness from their index, never from shared state.
/// workers == 0 picks the hardware count; workers == 1 runs inline.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t n, Fn fn, std::size_t workers = 0) {
    std::vector<Result> results(n);
    if (n == 0) return results;
    if (workers == 0) {
        workers = std::thread::hardware_concurrency();
        if (workers == 0) workers = 1;
    }
    if (workers > n) workers = n;

    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (!failed.load(std::memory_order_relaxed)) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) return;
                try {
                    results[i] = fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

} // namespace unipcb
