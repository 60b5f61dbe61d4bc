#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace structsens {

// STRUCTSENS_THREADS is the fallback when no explicit thread count is given.
inline int default_thread_count() {
    if (const char* env = std::getenv("STRUCTSENS_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

// Runs fn(i) for i in [0, n). Work items must be independent; callers write
// results into per-index slots so the output is identical for any thread
// count.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = static_cast<int>(std::min<std::size_t>(threads, n));
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace structsens
