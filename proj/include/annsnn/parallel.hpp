#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace annsnn {

/// Runs fn(begin, end) over contiguous shards of [0, n). Callers write results
/// into per-index slots so the outcome does not depend on the shard count.
template <typename Fn>
void parallel_shards(std::size_t n, unsigned threads, Fn&& fn)
{
    if (threads <= 1 || n < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t shards = std::min<std::size_t>(threads, n);
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(shards);
    workers.reserve(shards);
    for (std::size_t s = 0; s < shards; ++s) {
        const std::size_t begin = n * s / shards;
        const std::size_t end = n * (s + 1) / shards;
        workers.emplace_back([&, s, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[s] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace annsnn
