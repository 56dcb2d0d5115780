#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mtd {

/// Worker count: MTD_WORKERS environment variable when set, otherwise the
/// hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("MTD_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs body(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; exceptions are rethrown (lowest index wins) after
/// all workers finish, so failures are deterministic.
inline void parallel_for(int n, const std::function<void(int)>& body, int workers = 0) {
    if (workers <= 0) workers = worker_count();
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (int i = 0; i < n; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);
}

}  // namespace mtd
