// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace riskstop {

/// Thread count used by parallel_for: RISKSTOP_THREADS if set, otherwise
/// hardware concurrency. Always at least 1.
inline unsigned default_thread_count() {
    if (const char* env = std::getenv("RISKSTOP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs f(i) for i in [0, n) on static contiguous chunks. Callers must make
/// iterations independent; results have to be written to disjoint slots so
/// the outcome does not depend on the schedule. The first exception thrown
/// by any worker is rethrown on the calling thread.
template <class F>
void parallel_for(long n, F&& f, unsigned threads = 0) {
    if (n <= 0) return;
    if (threads == 0) threads = default_thread_count();
    threads = static_cast<unsigned>(std::min<long>(threads, n));
    if (threads <= 1) {
        for (long i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::vector<std::exception_ptr> errors(threads);
    const long chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const long lo = static_cast<long>(t) * chunk;
        const long hi = std::min(n, lo + chunk);
        pool.emplace_back([&, t, lo, hi] {
            try {
                for (long i = lo; i < hi; ++i) f(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace riskstop
