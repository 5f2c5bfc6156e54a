#pragma once

#include <array>
#include <cstdint>

namespace expfun {

// Philox 4x32-10 block function (counter-based, Random123 constants).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) noexcept {
    std::uint32_t x0 = ctr[0], x1 = ctr[1], x2 = ctr[2], x3 = ctr[3];
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int r = 0; r < 10; ++r) {
        const std::uint64_t p0 = 0xD2511F53ull * x0;
        const std::uint64_t p1 = 0xCD9E8D57ull * x2;
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        x0 = hi1 ^ x1 ^ k0;
        x1 = lo1;
        x2 = hi0 ^ x3 ^ k1;
        x3 = lo0;
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
    }
    return {x0, x1, x2, x3};
}

// UniformRandomBitGenerator over 64-bit words. The 64-bit seed is the Philox
// key; `stream` occupies the upper counter half, so every (seed, stream) pair
// is an independent substream regardless of how many words other streams drew.
// Estimators assign one stream per simulated path.
class Philox {
public:
    using result_type = std::uint64_t;

    explicit Philox(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          hi_{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() noexcept {
        if (have_second_) {
            have_second_ = false;
            return (static_cast<std::uint64_t>(out_[3]) << 32) | out_[2];
        }
        out_ = philox4x32_10({static_cast<std::uint32_t>(block_),
                              static_cast<std::uint32_t>(block_ >> 32), hi_[0], hi_[1]},
                             key_);
        ++block_;
        have_second_ = true;
        return (static_cast<std::uint64_t>(out_[1]) << 32) | out_[0];
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 2> hi_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> out_{};
    bool have_second_ = false;
};

// Stream-id offsets separating independent sampling purposes inside one
// experiment; path index is added to the base.
namespace streams {
inline constexpr std::uint64_t main_paths = 0;
inline constexpr std::uint64_t front_paths = std::uint64_t{1} << 40;
inline constexpr std::uint64_t back_paths = std::uint64_t{2} << 40;
inline constexpr std::uint64_t aux_paths = std::uint64_t{3} << 40;
inline constexpr std::uint64_t aux_paths2 = std::uint64_t{4} << 40;
}  // namespace streams

}  // namespace expfun
