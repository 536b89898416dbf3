#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tontine {

/// Resolves a requested worker count; 0 means one per hardware thread.
inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1U : hw;
}

/// Splits [0, count) into contiguous blocks, one per worker, and calls
/// body(worker, begin, end). The first exception thrown by any worker is
/// rethrown on the calling thread after all workers join.
template <typename Body>
void parallel_blocks(std::uint64_t count, unsigned threads, Body&& body) {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(count, 1)));
    if (workers <= 1) {
        body(0U, std::uint64_t{0}, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t begin = count * w / workers;
        const std::uint64_t end = count * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
            try {
                body(w, begin, end);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Number of workers parallel_blocks will actually use.
inline unsigned worker_count(std::uint64_t count, unsigned threads) {
    return static_cast<unsigned>(
        std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(count, 1)));
}

}  // namespace tontine
