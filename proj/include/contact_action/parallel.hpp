#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace contact_action {

/// Worker count used when a caller passes 0.
inline unsigned default_workers()
{
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

/// Runs fn(i) for i in [0, n) over contiguous chunks. fn must only write
/// state owned by index i, so results do not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn)
{
    if (workers == 0) workers = default_workers();
    const std::size_t w = std::min<std::size_t>(workers, n);
    if (w <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(w);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace contact_action
