#pragma once

// Deterministic random streams and a small chunked thread pool.
// Results never depend on the number of worker threads: every random draw is
// keyed by (seed, index) and chunk outputs are merged in index order.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

namespace escape_dim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
inline double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Counter-based uniform: the same (seed, stream, index) always yields the same value.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return unit_double(splitmix64(splitmix64(seed ^ splitmix64(stream)) + index));
}

/// Sequential stream built on mt19937_64, whose output sequence is fixed by the standard.
class SeededStream {
public:
    explicit SeededStream(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(splitmix64(seed) ^ splitmix64(stream + 0x51ed2701ULL)) {}

    double uniform() { return unit_double(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling keeps the draw unbiased
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

inline unsigned worker_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Split [0, n) into contiguous chunks and run body(chunk, begin, end) on worker threads.
/// Returns the number of chunks so callers can size per-chunk result buffers beforehand.
inline std::size_t chunk_count(std::size_t n) {
    return std::max<std::size_t>(1, std::min<std::size_t>(n, 4 * worker_count()));
}

template <class Body>
void parallel_chunks(std::size_t n, Body&& body) {
    const std::size_t chunks = chunk_count(n);
    const std::size_t step = (n + chunks - 1) / chunks;
    const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c)
            body(c, std::min(n, c * step), std::min(n, (c + 1) * step));
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers)
                body(c, std::min(n, c * step), std::min(n, (c + 1) * step));
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace escape_dim
