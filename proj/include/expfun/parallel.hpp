#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace expfun {

inline unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1;
}

// Batched map-reduce over path indices [0, n). Work is split into fixed-size
// batches and the per-batch partials are combined in batch order, so the
// result is identical for any worker count (including 1).
template <class Partial, class MapBatch, class Combine>
Partial parallel_reduce_ordered(std::uint64_t n, std::uint64_t batch_size, unsigned workers,
                                Partial init, MapBatch map_batch, Combine combine) {
    if (n == 0) return init;
    if (batch_size == 0) batch_size = 1;
    const std::uint64_t n_batches = (n + batch_size - 1) / batch_size;
    std::vector<Partial> parts(static_cast<std::size_t>(n_batches), init);
    std::atomic<std::uint64_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_batches) return;
            const std::uint64_t lo = b * batch_size;
            const std::uint64_t hi = std::min(n, lo + batch_size);
            parts[static_cast<std::size_t>(b)] = map_batch(lo, hi);
        }
    };
    const unsigned w = static_cast<unsigned>(
        std::min<std::uint64_t>(resolve_workers(workers), n_batches));
    if (w <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(w);
        for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    Partial acc = init;
    for (auto& p : parts) acc = combine(acc, p);
    return acc;
}

}  // namespace expfun
