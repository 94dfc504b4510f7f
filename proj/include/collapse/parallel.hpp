#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace collapse {

inline std::atomic<int>& max_threads_setting() {
    static std::atomic<int> n{1};
    return n;
}

/// Upper bound on worker threads used by data-parallel loops (default 1).
inline void set_max_threads(int n) { max_threads_setting() = std::max(1, n); }
inline int max_threads() { return max_threads_setting(); }

/// Runs body(i) for i in [0, count) on up to max_threads() workers with a
/// static partition. Callers combine per-index results themselves, so the
/// outcome does not depend on the schedule.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(max_threads(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) body(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace collapse
