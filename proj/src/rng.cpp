#include "incpref/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace incpref {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double uniform_open(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream, StreamTag tag, std::uint32_t substream) {
    if (substream >= (1u << 24)) throw std::invalid_argument("NormalStream: substream out of range");
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    ctr_ = {0u, static_cast<std::uint32_t>(tag) << 24 | substream, static_cast<std::uint32_t>(stream),
            static_cast<std::uint32_t>(stream >> 32)};
}

void NormalStream::refill() {
    const auto r = Philox4x32::generate(ctr_, key_);
    if (++ctr_[0] == 0) throw std::overflow_error("NormalStream: counter exhausted");
    const double u1 = uniform_open(r[0], r[1]);
    const double u2 = uniform_open(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    cache_[0] = rad * std::cos(ang);
    cache_[1] = rad * std::sin(ang);
    avail_ = 2;
}

double NormalStream::next() {
    if (avail_ == 0) refill();
    return cache_[2 - avail_--];
}

void NormalStream::fill(std::span<double> out) {
    for (double& x : out) x = next();
}

}  // namespace incpref
