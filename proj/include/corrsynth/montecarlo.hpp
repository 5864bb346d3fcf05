#pragma once

// Parallel Monte-Carlo trials. Each trial owns its generator (seeded from the
// master seed and the trial index) and results are gathered by trial index,
// so the output does not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace corrsynth {

/// Worker cap: CORRSYNTH_THREADS if set and positive, else hardware concurrency.
inline unsigned thread_cap() {
    if (const char* env = std::getenv("CORRSYNTH_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(trial) for trial in [0, trials) and returns results in trial order.
template <class R, class F>
std::vector<R> run_trials(std::size_t trials, F&& fn) {
    std::vector<R> out(trials);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_cap(), std::max<std::size_t>(trials, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < trials; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= trials) return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(trials);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

struct SampleStats {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    std::size_t count = 0;

    /// Standard error of the variance estimate under a normal model.
    double variance_standard_error() const {
        return count > 1 ? variance * std::sqrt(2.0 / static_cast<double>(count - 1)) : 0.0;
    }
    double mean_standard_error() const {
        return count > 0 ? std::sqrt(variance / static_cast<double>(count)) : 0.0;
    }
};

inline SampleStats sample_stats(std::span<const double> xs) {
    SampleStats s;
    s.count = xs.size();
    if (xs.empty()) return s;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    s.mean = mean;
    s.variance = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
    return s;
}

}  // namespace corrsynth
