#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace gti {

/// Run fn(0..count-1) across a few workers. Each index owns its output slot,
/// so results are identical to the sequential order regardless of worker
/// count; the first exception is rethrown on the caller.
inline void parallel_for_indexed(int count, const std::function<void(int)>& fn,
                                 int workers = 0) {
    if (workers <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        workers = hw == 0 ? 1 : static_cast<int>(hw);
    }
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < count; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace gti
