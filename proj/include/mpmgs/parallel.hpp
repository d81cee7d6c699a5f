#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mpmgs {

/// Runs fn(begin, end, worker) over [0, n) split into `threads` contiguous
/// chunks. With threads <= 1 the call degenerates to fn(0, n, 0) on the
/// calling thread, which is the bitwise-deterministic reference path.
template <class F>
void parallel_for_chunks(std::size_t n, int threads, F&& fn) {
    const std::size_t t = std::min<std::size_t>(std::max(threads, 1), n == 0 ? 1 : n);
    if (t <= 1) {
        fn(std::size_t{0}, n, 0);
        return;
    }
    const std::size_t chunk = (n + t - 1) / t;
    std::vector<std::thread> pool;
    pool.reserve(t - 1);
    for (std::size_t w = 1; w < t; ++w) {
        const std::size_t b = std::min(n, w * chunk);
        const std::size_t e = std::min(n, b + chunk);
        pool.emplace_back([&fn, b, e, w] { fn(b, e, static_cast<int>(w)); });
    }
    fn(std::size_t{0}, std::min(n, chunk), 0);
    for (auto& th : pool) th.join();
}

}  // namespace mpmgs
