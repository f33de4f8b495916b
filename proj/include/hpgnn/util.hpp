#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace hpgnn {

/// FNV-1a over bytes. Stable across runs and platforms; used for cache keys
/// and file checksums.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// splitmix64 step; used to derive independent per-task seeds from one master seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Shortest exact decimal representation of a double (round-trips bit-exactly).
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class Timer {
public:
    Timer() : start_(clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }
    double milliseconds() const { return seconds() * 1e3; }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
};

/// Static-partition parallel for over [0, count). With workers <= 1 runs inline.
/// The body must write only to disjoint slots, so scheduling never affects results.
inline void parallel_for(std::int64_t count, int workers,
                         const std::function<void(std::int64_t)>& body) {
    if (workers <= 1 || count <= 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    int t = std::min<std::int64_t>(workers, count);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (int w = 0; w < t; ++w) {
        pool.emplace_back([&, w]() {
            for (std::int64_t i = w; i < count; i += t) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Least-squares slope of y against x.
inline double linear_fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace hpgnn
