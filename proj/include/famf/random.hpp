#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <limits>
#include <functional>
#include <random>
#include <thread>
#include <vector>

namespace famf {

// Engine for one independent stream, keyed by a master seed and a path of
// indices (e.g. condition, replicate). Streams do not depend on the order in
// which they are requested.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * path.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto p : path) push(p);
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

// Standard normal draw via Box-Muller on the engine's raw output, so the
// stream is identical across standard library implementations.
class NormalSource {
public:
    explicit NormalSource(std::mt19937_64& engine) : engine_(engine) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    // Uniform on (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

private:
    std::mt19937_64& engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline std::size_t uniform_index(std::mt19937_64& engine, std::size_t n) {
    // Rejection sampling keeps the draw unbiased and portable.
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t v;
    do {
        v = engine();
    } while (v >= limit);
    return static_cast<std::size_t>(v % range);
}

// Runs body(i) for i in [0, count). Work is split across hardware threads;
// body must only write to slot i of any shared output.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         unsigned max_threads = 0) {
    unsigned hw = max_threads ? max_threads : std::thread::hardware_concurrency();
    if (hw <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, count));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += workers) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace famf
