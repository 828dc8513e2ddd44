#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

namespace ptm {

using Stream = std::mt19937_64;

/// SplitMix64 finaliser (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives independent replicate streams from a single 64-bit seed.
///
/// Replicate i is seeded with
///     mix(seed, i) = splitmix64(splitmix64(seed) ^ (i * 0xD1B54A32D192ED03))
/// so stream i depends only on (seed, i): adding replicates never changes the
/// draws of earlier ones, and the schedule that runs them is irrelevant.
class StreamFactory {
public:
    static constexpr std::uint64_t kIndexMultiplier = 0xD1B54A32D192ED03ULL;

    explicit StreamFactory(std::uint64_t seed) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    static constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t index) noexcept
    {
        return splitmix64(splitmix64(seed) ^ (index * kIndexMultiplier));
    }

    Stream stream(std::uint64_t index) const { return Stream(mix(seed_, index)); }

    /// A child factory for a sub-experiment, independent of this factory's streams.
    StreamFactory child(std::uint64_t tag) const noexcept
    {
        return StreamFactory(splitmix64(seed_ ^ splitmix64(~tag)));
    }

private:
    std::uint64_t seed_;
};

inline double uniform01(Stream& rng)
{
    // 53 random bits into [0, 1).
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Open interval (0, 1); safe for logarithms and inverse CDFs.
inline double uniform_open(Stream& rng)
{
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Runs body(i) for i in [0, n) on up to `threads` workers with a static
/// partition. body must write only to slot i of caller-owned storage.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body)
{
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t begin = n * w / workers;
            const std::size_t end = n * (w + 1) / workers;
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Settings shared by every Monte Carlo routine.
struct McOptions {
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

}  // namespace ptm
