#pragma once

// Counter-based normal variates. Every draw is a pure function of
// (seed, stream, trajectory, step, mode), so trajectories can be simulated in
// any order on any number of threads and still see the same noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace wavecouple {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter apply(Counter ctr, Key key) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter single_round(const Counter& c, const Key& k) noexcept
    {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Standard normals for one trajectory of one stream. Counter layout:
/// word 0 = mode pair | stream << 16, word 1 = step, words 2-3 = trajectory;
/// the key is the 64-bit seed.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint32_t stream, std::uint64_t trajectory) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream & 0xFFFFu),
          traj_lo_(static_cast<std::uint32_t>(trajectory)),
          traj_hi_(static_cast<std::uint32_t>(trajectory >> 32))
    {
    }

    /// Fills out[j] with the standard normal for (step, mode j), j = 0..size-1.
    void fill(std::uint32_t step, std::span<double> out) const noexcept
    {
        const std::size_t n = out.size();
        for (std::size_t pair = 0; 2 * pair < n; ++pair) {
            const auto block = block_normals(step, static_cast<std::uint32_t>(pair));
            out[2 * pair] = block[0];
            if (2 * pair + 1 < n) out[2 * pair + 1] = block[1];
        }
    }

    /// The two normals of modes 2*pair and 2*pair+1 at `step` (Box-Muller).
    std::array<double, 2> block_normals(std::uint32_t step, std::uint32_t pair) const noexcept
    {
        const Philox4x32::Counter ctr{(pair & 0xFFFFu) | (stream_ << 16), step, traj_lo_, traj_hi_};
        const auto r = Philox4x32::apply(ctr, key_);
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        // Uniforms on the open interval (0, 1).
        const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = (static_cast<double>(b >> 11) + 0.5) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

private:
    Philox4x32::Key key_;
    std::uint32_t stream_;
    std::uint32_t traj_lo_;
    std::uint32_t traj_hi_;
};

} // namespace wavecouple
