#ifndef SEGQA_PARALLEL_HPP
#define SEGQA_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace segqa {

inline std::size_t default_jobs() { return std::max<std::size_t>(1, std::thread::hardware_concurrency()); }

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each index runs
// exactly once, so results written to slot i do not depend on scheduling.
// The first exception (lowest index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
    std::vector<std::exception_ptr> errors(count);
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) run(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// Like parallel_for but keeps every failure instead of rethrowing.
template <typename Fn>
std::vector<std::exception_ptr> parallel_for_collect(std::size_t count, std::size_t jobs, Fn&& fn) {
    std::vector<std::exception_ptr> errors(count);
    parallel_for(count, jobs, [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    return errors;
}

}  // namespace segqa

#endif  // SEGQA_PARALLEL_HPP
