#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace nilab {

// Runs body(i) for i in [0,n) on up to jobs threads. Each index writes its own slot, so results
// do not depend on scheduling. The first exception is rethrown after all workers stop.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& body)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr err;
    std::atomic_flag err_set = ATOMIC_FLAG_INIT;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    if (!err_set.test_and_set()) err = std::current_exception();
                    failed = true;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

} // namespace nilab
