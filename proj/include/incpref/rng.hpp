#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace incpref {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    static Counter generate(Counter ctr, Key key);
};

// Stream purposes; each gets a disjoint slice of the counter space.
enum class StreamTag : std::uint32_t {
    increments = 1,
    ou_aux = 2,
    nested_increments = 3,
    nested_aux = 4,
    test = 15,
};

// Standard normals from Philox via Box-Muller. A stream is fully identified by
// (seed, stream id, tag, substream); the values do not depend on who generates them.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream, StreamTag tag, std::uint32_t substream = 0);

    double next();
    void fill(std::span<double> out);

private:
    void refill();

    Philox4x32::Key key_;
    Philox4x32::Counter ctr_;
    double cache_[2] = {0.0, 0.0};
    int avail_ = 0;
};

// Uniform (0,1) from 64 random bits; never returns 0 or 1.
double uniform_open(std::uint32_t hi, std::uint32_t lo);

}  // namespace incpref
