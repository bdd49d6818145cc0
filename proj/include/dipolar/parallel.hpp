#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dipolar {

// Runs fn(i) for i in [0, n) on up to `threads` workers; results land by index,
// so output order never depends on scheduling.
struct executor {
    int threads = 1;

    template <class F>
    auto map(int n, F&& fn) const -> std::vector<decltype(fn(0))> {
        std::vector<decltype(fn(0))> out(n);
        const int workers = std::max(1, std::min(threads, n));
        if (workers == 1) {
            for (int i = 0; i < n; ++i) out[i] = fn(i);
            return out;
        }
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex guard;
        auto run = [&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    out[i] = fn(i);
                } catch (...) {
                    std::lock_guard lock(guard);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
        return out;
    }
};

}  // namespace dipolar
