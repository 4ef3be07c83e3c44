#pragma once

#include <thread>
#include <vector>

#include "stel/errors.hpp"

namespace stel {

// Runs fn(i) for i in [0, count) across the given number of worker threads.
// Work is assigned by fixed stride and every call writes only to data indexed
// by its own i, so the result of any reduction performed afterwards in index
// order is byte-identical for every worker count. Exceptions are rethrown on
// the calling thread.
template <typename Fn>
void parallel_for_index(int count, int workers, Fn&& fn) {
    if (workers < 1) throw ConfigError("parallel_for_index: workers must be >= 1");
    if (workers == 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int i = w; i < count; i += workers) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace stel
