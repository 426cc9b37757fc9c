#pragma once
// Deterministic random streams.
//
// The generator is PCG-XSH-RR 64/32 ("pcg32", O'Neill 2014); the stream id
// selects the LCG increment, so a (seed, stream_id) pair fully determines
// the sequence and distinct stream ids give independent sequences. All
// distributions are implemented here rather than via <random> so that draw
// sequences are identical across standard libraries.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace hbac {

class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Unbiased draw from {0, ..., bound-1}; bound must be nonzero.
    std::uint64_t next_below(std::uint64_t bound);

    // 53-bit uniform in [0, 1).
    double next_double();
    double next_uniform(double lo, double hi);
    bool next_bernoulli(double p);

    // Standard normal via Box-Muller; the second value of each pair is
    // cached, so draws come in a fixed order regardless of usage.
    double next_gaussian();

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[next_below(i)]);
        }
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

// Collapses up to three identifiers into one stream id (splitmix64 mixing).
// Used to hand out non-overlapping substreams, e.g. one per simulation.
std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b = 0,
                            std::uint64_t c = 0);

}  // namespace hbac
