#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

#include "mixsig/tensor.hpp"

namespace mixsig {

/// Counter-based random stream (Philox4x32-10).
///
/// Output depends only on (seed, stream_id, number of draws so far), so a
/// stream can be recreated anywhere from its coordinates. Distinct stream ids
/// give independent sequences under the same seed.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

    /// Stream id for a tuple of coordinates, e.g. {purpose, run, batch, layer}.
    static std::uint64_t stream_id_for(std::initializer_list<std::uint64_t> coords) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal via Box-Muller; pairs are cached.
    double normal() noexcept;
    /// Uniform integer in [0, n), n > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int block_pos_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

/// Raw Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// I.i.d. N(0, sigma^2) samples. sigma == 0 yields exact zeros without
/// advancing the stream. Throws std::invalid_argument for negative sigma.
Tensor gaussian_sample(RngStream& rng, double sigma, const Shape& shape);

}  // namespace mixsig
