#include "mixsig/kernel_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mixsig {

Kernel3x3 pattern_from_encoding(std::uint16_t encoding) {
    if (encoding >= 512) throw std::invalid_argument("kernel encoding must fit in 9 bits");
    Kernel3x3 p{};
    for (std::size_t i = 0; i < kKernelTaps; ++i) p[i] = (encoding >> (8 - i)) & 1u ? 1.0 : 0.0;
    return p;
}

std::uint16_t encoding_from_pattern(const Kernel3x3& pattern) {
    std::uint16_t e = 0;
    for (std::size_t i = 0; i < kKernelTaps; ++i) {
        if (pattern[i] != 0.0 && pattern[i] != 1.0) throw std::invalid_argument("pattern values must be 0 or 1");
        e = static_cast<std::uint16_t>((e << 1) | (pattern[i] == 1.0 ? 1u : 0u));
    }
    return e;
}

std::pair<double, double> KernelSet::value_range() const {
    if (entries.empty()) throw std::invalid_argument("kernel set is empty");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& e : entries) {
        const auto [mn, mx] = std::minmax_element(e.effective.begin(), e.effective.end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
    }
    return {lo, hi};
}

std::size_t KernelSet::nearest(std::span<const double, kKernelTaps> kernel) const {
    if (entries.empty()) throw std::invalid_argument("nearest kernel: empty kernel set");
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& eff = entries[k].effective;
        double d = 0.0;
        for (std::size_t t = 0; t < kKernelTaps; ++t) d += std::abs(eff[t] - kernel[t]);
        if (d < best_dist) {
            best_dist = d;
            best = k;
        }
    }
    return best;
}

Tensor KernelSet::effective_tensor(std::size_t index) const {
    const auto& eff = entries.at(index).effective;
    return Tensor({3, 3}, std::vector<double>(eff.begin(), eff.end()));
}

}  // namespace mixsig
