// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace wespe {

/// PCG32 generator. Two words of state, trivially serializable, identical
/// streams on every platform. std::mt19937 would also work but drags a
/// textual serialization format into the checkpoint files.
class Rng {
public:
    explicit Rng(uint64_t seed = 0, uint64_t stream = 1) { reseed(seed, stream); }

    void reseed(uint64_t seed, uint64_t stream = 1) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
        have_gauss_ = false;
        gauss_ = 0.0;
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        // Rejection-free modulo bias is negligible for the sizes used here,
        // but reject anyway so streams are exactly reproducible regardless.
        uint64_t threshold = (-n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller (cached pair).
    double gaussian() {
        if (have_gauss_) {
            have_gauss_ = false;
            return gauss_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        gauss_ = r * std::sin(a);
        have_gauss_ = true;
        return r * std::cos(a);
    }

    // State access for checkpointing.
    uint64_t state() const { return state_; }
    uint64_t inc() const { return inc_; }
    bool have_gauss() const { return have_gauss_; }
    double gauss_cache() const { return gauss_; }
    void restore(uint64_t state, uint64_t inc, bool have_gauss, double gauss) {
        state_ = state;
        inc_ = inc;
        have_gauss_ = have_gauss;
        gauss_ = gauss;
    }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 1;
    bool have_gauss_ = false;
    double gauss_ = 0.0;
};

}  // namespace wespe
