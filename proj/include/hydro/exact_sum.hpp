#pragma once

/**
 * @file exact_sum.hpp
 * @brief Order-independent summation of doubles.
 *
 * Every addend is split into 32-bit digits of one long fixed-point number
 * spanning the whole binary64 exponent range, so the accumulated value is
 * exact. Partial accumulators from different workers merge exactly, which
 * makes global sums bit-identical for any decomposition of the same data.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

namespace hydro {

class ExactAccumulator
{
public:
    static constexpr int kLimbs = 72;
    static constexpr int kBias = 1152; // bit position of 2^0; keeps subnormal lsbs at >= 0

    void add(double x)
    {
        if (x == 0.0 || !std::isfinite(x)) {
            if (!std::isfinite(x)) {
                nonfinite_ = true;
            }
            return;
        }
        int exp = 0;
        const double m = std::frexp(x, &exp);            // x = m * 2^exp, 0.5 <= |m| < 1
        const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53)); // |mant| < 2^53
        const int pos = exp - 53 + kBias;                // bit position of mant's lsb
        const int limb = pos / 32;
        const int shift = pos % 32;
        const bool neg = mant < 0;
        const auto mag = static_cast<unsigned __int128>(neg ? -mant : mant) << shift;
        for (int l = 0; l < 3 && limb + l < kLimbs; ++l) {
            const auto digit = static_cast<std::int64_t>((mag >> (32 * l)) & 0xffffffffu);
            limbs_[static_cast<std::size_t>(limb + l)] += neg ? -digit : digit;
        }
        if (++pending_ >= (1 << 29)) {
            normalize();
        }
    }

    void add(std::span<const double> xs)
    {
        for (double x : xs) {
            add(x);
        }
    }

    void merge(const ExactAccumulator& other)
    {
        for (int l = 0; l < kLimbs; ++l) {
            limbs_[static_cast<std::size_t>(l)] += other.limbs_[static_cast<std::size_t>(l)];
        }
        nonfinite_ = nonfinite_ || other.nonfinite_;
        normalize();
    }

    /// Carries so every limb but the last lies in [0, 2^32).
    void normalize()
    {
        for (int l = 0; l + 1 < kLimbs; ++l) {
            auto& v = limbs_[static_cast<std::size_t>(l)];
            const std::int64_t carry = v >> 32; // arithmetic shift: floor division
            v -= carry * (std::int64_t{1} << 32);
            limbs_[static_cast<std::size_t>(l + 1)] += carry;
        }
        pending_ = 0;
    }

    /// Digits as doubles (exact integers below 2^53) for transport.
    std::array<double, kLimbs> digits()
    {
        normalize();
        std::array<double, kLimbs> out{};
        for (int l = 0; l < kLimbs; ++l) {
            out[static_cast<std::size_t>(l)] = static_cast<double>(limbs_[static_cast<std::size_t>(l)]);
        }
        if (nonfinite_) {
            out[0] = std::nan("");
        }
        return out;
    }

    static ExactAccumulator from_digits(std::span<const double> d)
    {
        ExactAccumulator acc;
        for (int l = 0; l < kLimbs && l < static_cast<int>(d.size()); ++l) {
            if (!std::isfinite(d[static_cast<std::size_t>(l)])) {
                acc.nonfinite_ = true;
                continue;
            }
            acc.limbs_[static_cast<std::size_t>(l)] = static_cast<std::int64_t>(d[static_cast<std::size_t>(l)]);
        }
        acc.normalize();
        return acc;
    }

    /// Deterministic rounding of the exact value: depends only on the value.
    double value() const
    {
        if (nonfinite_) {
            return std::nan("");
        }
        ExactAccumulator t = *this;
        t.normalize();
        bool neg = t.limbs_[kLimbs - 1] < 0;
        if (neg) {
            for (auto& v : t.limbs_) {
                v = -v;
            }
            t.normalize();
        }
        int top = kLimbs - 1;
        while (top >= 0 && t.limbs_[static_cast<std::size_t>(top)] == 0) {
            --top;
        }
        if (top < 0) {
            return 0.0;
        }
        double r = 0.0;
        for (int l = top; l >= 0 && l >= top - 3; --l) {
            r += std::ldexp(static_cast<double>(t.limbs_[static_cast<std::size_t>(l)]), 32 * l - kBias);
        }
        return neg ? -r : r;
    }

private:
    std::array<std::int64_t, kLimbs> limbs_{};
    int pending_ = 0;
    bool nonfinite_ = false;
};

} // namespace hydro
