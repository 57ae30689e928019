#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace bnmtf::detail {

/// Runs fn(i) for i in [0, n). Work items must be independent and write to
/// disjoint locations; the chunking never affects results, only wall time.
template <typename Fn>
void parallel_for(long n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<long>(threads, n));
    const long chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        const long begin = t * chunk;
        const long end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn]() {
            for (long i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace bnmtf::detail
