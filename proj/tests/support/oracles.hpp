#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mixsig/kernel_set.hpp"
#include "mixsig/model.hpp"
#include "mixsig/tensor.hpp"

namespace mixsig::testkit {

/// Fixed-point rounding by listing every representable value of the (L, m)
/// format and taking the closest one; equidistant candidates resolve to the
/// larger magnitude.
inline double quantize_by_enumeration(double x, int total_bits, int integer_bits) {
    const double step = std::ldexp(1.0, integer_bits + 1 - total_bits);
    const long top = (1L << (total_bits - 1)) - 1;  // largest code magnitude
    double best = 0.0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (long code = -top; code <= top; ++code) {
        const double v = static_cast<double>(code) * step;
        const double d = std::abs(x - v);
        if (d < best_dist || (d == best_dist && std::abs(v) > std::abs(best))) {
            best = v;
            best_dist = d;
        }
    }
    return best;
}

/// Index of the L1-nearest effective kernel, first index on ties.
inline std::size_t nearest_by_scan(const KernelSet& set, const double* kernel) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < set.entries.size(); ++k) {
        double d = 0.0;
        for (std::size_t t = 0; t < 9; ++t) d += std::abs(set.entries[k].effective[t] - kernel[t]);
        if (d < best_dist) {
            best_dist = d;
            best = k;
        }
    }
    return best;
}

/// Plain-loop digital network in inference mode: nearest-kernel selection,
/// zero-padded 3x3 convolution summed over input channels, batch norm from the
/// running statistics, binarization, 2x2 max pooling (index sampling after the
/// third layer), weighted channel sum and softmax. Returns [B, 9] probabilities.
inline std::vector<std::vector<double>> reference_forward(const model::McnnModel& m, const KernelSet& set,
                                                          const Tensor& images) {
    const std::size_t B = images.extent(0);
    std::vector<std::vector<double>> out;
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t side = 28, Q = 1;
        // act[(i * side + j) * Q + q]
        std::vector<double> act(images.data() + b * 784, images.data() + (b + 1) * 784);
        for (std::size_t k = 0; k < 3; ++k) {
            const Tensor& latent = m.latent_kernels[k];
            const std::size_t C = latent.extent(3);
            std::vector<double> W(9 * Q * C);
            for (std::size_t q = 0; q < Q; ++q) {
                for (std::size_t c = 0; c < C; ++c) {
                    double taps[9];
                    for (std::size_t t = 0; t < 9; ++t) taps[t] = latent.at(t / 3, t % 3, q, c);
                    const auto& eff = set.entries[nearest_by_scan(set, taps)].effective;
                    for (std::size_t t = 0; t < 9; ++t) W[(t * Q + q) * C + c] = eff[t];
                }
            }
            std::vector<double> y(side * side * C);
            for (std::size_t i = 0; i < side; ++i) {
                for (std::size_t j = 0; j < side; ++j) {
                    for (std::size_t c = 0; c < C; ++c) {
                        double H = 0.0;
                        for (std::size_t q = 0; q < Q; ++q) {
                            for (long mm = static_cast<long>(i) - 1; mm <= static_cast<long>(i) + 1; ++mm) {
                                for (long nn = static_cast<long>(j) - 1; nn <= static_cast<long>(j) + 1; ++nn) {
                                    if (mm < 0 || nn < 0 || mm >= static_cast<long>(side) || nn >= static_cast<long>(side)) continue;
                                    const std::size_t r = static_cast<std::size_t>(mm - static_cast<long>(i) + 1);
                                    const std::size_t s = static_cast<std::size_t>(nn - static_cast<long>(j) + 1);
                                    H += act[(static_cast<std::size_t>(mm) * side + static_cast<std::size_t>(nn)) * Q + q] *
                                         W[((r * 3 + s) * Q + q) * C + c];
                                }
                            }
                        }
                        const auto& bn = m.bn[k];
                        const double v = bn.gamma[c] * (H - bn.running_mu[c]) / (bn.running_sigma[c] + bn.eps_bn);
                        y[(i * side + j) * C + c] = v > m.binarize_threshold ? 1.0 : 0.0;
                    }
                }
            }
            if (k < 2) {
                const std::size_t half = side / 2;
                std::vector<double> pooled(half * half * C);
                for (std::size_t i = 0; i < half; ++i) {
                    for (std::size_t j = 0; j < half; ++j) {
                        for (std::size_t c = 0; c < C; ++c) {
                            double v = -std::numeric_limits<double>::infinity();
                            for (std::size_t di = 0; di < 2; ++di) {
                                for (std::size_t dj = 0; dj < 2; ++dj) {
                                    v = std::max(v, y[((2 * i + di) * side + 2 * j + dj) * C + c]);
                                }
                            }
                            pooled[(i * half + j) * C + c] = v;
                        }
                    }
                }
                act = std::move(pooled);
                side = half;
            } else {
                const std::size_t idx[3] = {1, 4, 6};
                std::vector<double> sampled(9 * C);
                for (std::size_t r = 0; r < 3; ++r) {
                    for (std::size_t s = 0; s < 3; ++s) {
                        for (std::size_t c = 0; c < C; ++c) sampled[(r * 3 + s) * C + c] = y[(idx[r] * side + idx[s]) * C + c];
                    }
                }
                act = std::move(sampled);
                side = 3;
            }
            Q = C;
        }
        std::vector<double> logits(9, 0.0);
        for (std::size_t p = 0; p < 9; ++p) {
            for (std::size_t c = 0; c < Q; ++c) {
                const double w = m.binary_layer4 ? (m.layer4_weights[c] >= 0.0 ? 1.0 : -1.0) : m.layer4_weights[c];
                logits[p] += w * act[p * Q + c];
            }
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& l : logits) z += (l = std::exp(l - mx));
        for (auto& l : logits) l /= z;
        out.push_back(logits);
    }
    return out;
}

}  // namespace mixsig::testkit
