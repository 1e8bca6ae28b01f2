#ifndef TENSASYM_RNG_HPP
#define TENSASYM_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>

namespace tensasym {

/**
 * Philox4x32-10 counter-based generator as a UniformRandomBitGenerator.
 * A stream is fixed by (key, counter high words); the low counter word
 * advances as blocks are consumed.
 */
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    result_type operator()() {
        if (idx_ == 4) {
            buf_ = block(ctr_, key_);
            if (++ctr_[0] == 0) ++ctr_[1];
            idx_ = 0;
        }
        return buf_[idx_++];
    }

    void discard(unsigned long long z) {
        while (z--) (*this)();
    }

    static Block block(Block c, Key k) {
        for (int r = 0; r < 10; ++r) {
            if (r) {
                k[0] += kW0;
                k[1] += kW1;
            }
            std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
            std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
            auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        }
        return c;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    Key key_;
    Block ctr_;
    Block buf_{};
    int idx_ = 4;
};

}  // namespace tensasym

#endif
