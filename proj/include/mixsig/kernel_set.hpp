#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mixsig/tensor.hpp"

namespace mixsig {

inline constexpr std::size_t kKernelTaps = 9;
using Kernel3x3 = std::array<double, kKernelTaps>;

/// Row-major 3x3 {0,1} pattern for a 9-bit encoding; top-left is the MSB.
Kernel3x3 pattern_from_encoding(std::uint16_t encoding);
std::uint16_t encoding_from_pattern(const Kernel3x3& pattern);

struct KernelEntry {
    std::uint16_t encoding = 0;
    Kernel3x3 pattern{};
    Kernel3x3 effective{};

    bool operator==(const KernelEntry&) const = default;
};

/// The finite set W' of kernels the analog device can realize, each tagged by
/// the ideal binary pattern it was programmed from.
struct KernelSet {
    std::vector<KernelEntry> entries;
    /// Generation parameters (mode, pad, normalization, residue draw, ...).
    std::map<std::string, std::string> info;

    std::size_t size() const noexcept { return entries.size(); }

    /// [min, max] over all effective kernel taps.
    std::pair<double, double> value_range() const;

    /// Index of the entry whose effective kernel is nearest in L1; ties go to
    /// the lowest index. Throws std::invalid_argument on an empty set.
    std::size_t nearest(std::span<const double, kKernelTaps> kernel) const;

    Tensor effective_tensor(std::size_t index) const;

    bool operator==(const KernelSet&) const = default;
};

}  // namespace mixsig
