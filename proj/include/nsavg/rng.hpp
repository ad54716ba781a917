#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace nsavg {

// Philox 4x32-10 counter-based block cipher (Salmon et al., SC'11).
// A block is a pure function of (key, counter), so streams can be replayed
// and split without shared state.
struct PhiloxBlock {
    uint32_t w[4];
};

namespace detail {

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    const uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}

}  // namespace detail

inline PhiloxBlock philox4x32(uint64_t key, uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3) {
    constexpr uint32_t kWeylA = 0x9E3779B9u;
    constexpr uint32_t kWeylB = 0xBB67AE85u;
    constexpr uint32_t kMulA = 0xD2511F53u;
    constexpr uint32_t kMulB = 0xCD9E8D57u;

    uint32_t k0 = static_cast<uint32_t>(key);
    uint32_t k1 = static_cast<uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        detail::mulhilo(kMulA, c0, hi0, lo0);
        detail::mulhilo(kMulB, c2, hi1, lo1);
        const uint32_t n0 = hi1 ^ c1 ^ k0;
        const uint32_t n1 = lo1;
        const uint32_t n2 = hi0 ^ c3 ^ k1;
        const uint32_t n3 = lo0;
        c0 = n0;
        c1 = n1;
        c2 = n2;
        c3 = n3;
        k0 += kWeylA;
        k1 += kWeylB;
    }
    return PhiloxBlock{{c0, c1, c2, c3}};
}

enum class StreamRole : uint32_t {
    Slow = 0,
    Fast = 1,
    Frozen = 2,
    Init = 3,
    Probe = 4,
};

// One logical noise stream: (root_seed, sample, role) identifies the stream,
// the counter is the draw index. Distinct triples give independent sequences;
// replaying a triple reproduces draws bit-exactly.
class NoiseStream {
public:
    NoiseStream(uint64_t root_seed, uint32_t sample, StreamRole role)
        : root_seed_(root_seed), sample_(sample), role_(static_cast<uint32_t>(role)) {}

    uint64_t root_seed() const { return root_seed_; }
    uint32_t sample() const { return sample_; }
    uint32_t role() const { return role_; }
    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

    // Two independent N(0,1) draws from one Philox block (Box-Muller).
    std::pair<double, double> normal_pair() {
        const PhiloxBlock b = next_block();
        const double u1 = to_unit(b.w[0], b.w[1]);
        const double u2 = to_unit(b.w[2], b.w[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    double uniform() {
        const PhiloxBlock b = next_block();
        return to_unit(b.w[0], b.w[1]);
    }

private:
    PhiloxBlock next_block() {
        const uint32_t c0 = static_cast<uint32_t>(counter_);
        const uint32_t c1 = static_cast<uint32_t>(counter_ >> 32);
        ++counter_;
        return philox4x32(root_seed_, c0, c1, sample_, role_);
    }

    // 53-bit mantissa, offset by half an ulp so the result lies in (0,1).
    static double to_unit(uint32_t hi, uint32_t lo) {
        const uint64_t x = (static_cast<uint64_t>(hi) << 32) | lo;
        return (static_cast<double>(x >> 11) + 0.5) * 0x1p-53;
    }

    uint64_t root_seed_;
    uint32_t sample_;
    uint32_t role_;
    uint64_t counter_ = 0;
};

}  // namespace nsavg
