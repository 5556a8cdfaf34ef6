#pragma once

#include <cstdint>

namespace aoi {

/// PCG64 (XSL-RR 128/64): 128-bit LCG core with a 64-bit output permutation.
/// Distinct `stream` values select distinct full-period sequences, and
/// advance() jumps ahead in O(log n), so replication streams never overlap.
class Pcg64 {
    using u128 = unsigned __int128;

public:
    Pcg64(std::uint64_t seed, std::uint64_t stream) {
        inc_ = (static_cast<u128>(stream) << 1) | 1u;
        state_ = 0;
        bump();
        state_ += seed;
        bump();
    }

    std::uint64_t next() {
        bump();
        const auto xored =
            static_cast<std::uint64_t>(state_ >> 64) ^ static_cast<std::uint64_t>(state_);
        const auto rot = static_cast<unsigned>(state_ >> 122);
        return (xored >> rot) | (xored << ((64u - rot) & 63u));
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Jump ahead by `delta` outputs without generating them.
    void advance(std::uint64_t delta) {
        u128 acc_mult = 1, acc_plus = 0;
        u128 cur_mult = kMultiplier, cur_plus = inc_;
        std::uint64_t d = delta;
        while (d > 0) {
            if (d & 1) {
                acc_mult *= cur_mult;
                acc_plus = acc_plus * cur_mult + cur_plus;
            }
            cur_plus = (cur_mult + 1) * cur_plus;
            cur_mult *= cur_mult;
            d >>= 1;
        }
        state_ = acc_mult * state_ + acc_plus;
    }

private:
    static constexpr u128 kMultiplier =
        (static_cast<u128>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;

    void bump() { state_ = state_ * kMultiplier + inc_; }

    u128 state_ = 0;
    u128 inc_ = 1;
};

}  // namespace aoi
