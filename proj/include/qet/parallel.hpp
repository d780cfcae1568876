#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qet {

/// Worker threads used by Monte Carlo drivers. Results never depend on it:
/// work is split into fixed chunks, each with its own random substream, and
/// chunk results are reduced in chunk order.
std::size_t worker_count() noexcept;
void set_worker_count(std::size_t n) noexcept;

/// Samples per chunk; part of the reproducibility contract, do not vary.
inline constexpr std::size_t kChunkSize = 1024;

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size = kChunkSize) noexcept {
    return (n + chunk_size - 1) / chunk_size;
}

/// Evaluates fn(chunk_index, begin, end) for every chunk of [0, n) and returns
/// the results indexed by chunk.
template <class Fn>
auto map_chunks(std::size_t n, Fn fn, std::size_t chunk_size = kChunkSize)
    -> std::vector<decltype(fn(std::size_t{}, std::size_t{}, std::size_t{}))> {
    using Result = decltype(fn(std::size_t{}, std::size_t{}, std::size_t{}));
    const std::size_t chunks = chunk_count(n, chunk_size);
    std::vector<Result> results(chunks);
    auto run = [&](std::size_t c) {
        const std::size_t begin = c * chunk_size;
        results[c] = fn(c, begin, std::min(n, begin + chunk_size));
    };
    const std::size_t workers = std::min(worker_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run(c);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t c = next++; c < chunks; c = next++) {
                try {
                    run(c);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

}  // namespace qet
