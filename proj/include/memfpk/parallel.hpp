#pragma once

// Minimal work distribution: indices are handed out dynamically, results
// must be written to per-index slots so output never depends on scheduling.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace memfpk {

/// 0 means "all hardware threads"; never returns 0.
inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Calls body(worker_id, index) for index in [0, n). The first exception
/// thrown by any worker stops the loop and is rethrown here.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& body) {
    threads = static_cast<unsigned>(
        std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    auto run = [&](unsigned wid) {
        try {
            for (;;) {
                const std::size_t q = next.fetch_add(1);
                if (q >= n) break;
                body(wid, q);
            }
        } catch (...) {
            std::lock_guard lock(err_mutex);
            if (!err) err = std::current_exception();
            next = n;
        }
    };
    if (threads <= 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace memfpk
