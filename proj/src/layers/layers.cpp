#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mixsig/layers.hpp"

namespace mixsig::layers {

MapDims MapDims::of(const Tensor& x, const char* what) {
    MapDims d;
    if (x.rank() == 3) {
        d.rows = x.extent(0);
        d.cols = x.extent(1);
        d.channels = x.extent(2);
    } else if (x.rank() == 4) {
        d.batched = true;
        d.batch = x.extent(0);
        d.rows = x.extent(1);
        d.cols = x.extent(2);
        d.channels = x.extent(3);
    } else {
        throw std::invalid_argument(std::string(what) + ": expected [M,N,C] or [B,M,N,C], got " +
                                    shape_to_string(x.shape()));
    }
    return d;
}

Shape MapDims::shape_with(std::size_t r, std::size_t c, std::size_t ch) const {
    if (batched) return {batch, r, c, ch};
    return {r, c, ch};
}

// Channel summation ------------------------------------------------------------

Tensor channel_sum(const Tensor& h) {
    if (h.rank() < 4) throw std::invalid_argument("channel_sum: expected [...,Q,C], got " + shape_to_string(h.shape()));
    const std::size_t C = h.extent(h.rank() - 1);
    const std::size_t Q = h.extent(h.rank() - 2);
    Shape out_shape(h.shape().begin(), h.shape().end() - 2);
    out_shape.push_back(C);
    Tensor H(out_shape, 0.0);
    const std::size_t pixels = H.size() / C;
    for (std::size_t p = 0; p < pixels; ++p) {
        double* out = H.data() + p * C;
        const double* in = h.data() + p * Q * C;
        for (std::size_t q = 0; q < Q; ++q) {
            for (std::size_t c = 0; c < C; ++c) out[c] += in[q * C + c];
        }
    }
    return H;
}

Tensor channel_sum_backward(const Tensor& dl_dH, std::size_t input_channels) {
    const std::size_t C = dl_dH.extent(dl_dH.rank() - 1);
    const std::size_t Q = input_channels;
    Shape h_shape(dl_dH.shape().begin(), dl_dH.shape().end() - 1);
    h_shape.push_back(Q);
    h_shape.push_back(C);
    Tensor dh(h_shape, 0.0);
    const std::size_t pixels = dl_dH.size() / C;
    for (std::size_t p = 0; p < pixels; ++p) {
        const double* g = dl_dH.data() + p * C;
        for (std::size_t q = 0; q < Q; ++q) std::copy(g, g + C, dh.data() + (p * Q + q) * C);
    }
    return dh;
}

// Batch normalization ------------------------------------------------------------

BatchNormState::BatchNormState(std::size_t channels)
    : gamma({channels}, 1.0),
      mu({channels}, 0.0),
      sigma({channels}, 1.0),
      running_mu({channels}, 0.0),
      running_sigma({channels}, 1.0) {}

BatchNormOutput batchnorm(const Tensor& H, BatchNormState& state, Mode mode) {
    const MapDims d = MapDims::of(H, "batchnorm");
    const std::size_t C = d.channels;
    if (C != state.channels()) throw std::invalid_argument("batchnorm: channel count mismatch with state");
    const std::size_t count = H.size() / C;

    BatchNormCache cache;
    cache.mode = mode;
    cache.H = H;
    cache.gamma = state.gamma;
    cache.mu.assign(C, 0.0);
    cache.sigma.assign(C, 0.0);
    cache.denom.assign(C, 0.0);

    if (mode == Mode::train) {
        if (count < 2) throw std::invalid_argument("batchnorm: training needs at least 2 values per channel");
        for (std::size_t p = 0; p < count; ++p) {
            for (std::size_t c = 0; c < C; ++c) cache.mu[c] += H[p * C + c];
        }
        for (auto& m : cache.mu) m /= static_cast<double>(count);
        for (std::size_t p = 0; p < count; ++p) {
            for (std::size_t c = 0; c < C; ++c) {
                const double dv = H[p * C + c] - cache.mu[c];
                cache.sigma[c] += dv * dv;
            }
        }
        for (std::size_t c = 0; c < C; ++c) {
            cache.sigma[c] = std::sqrt(cache.sigma[c] / static_cast<double>(count));
            state.mu[c] = cache.mu[c];
            state.sigma[c] = cache.sigma[c];
            state.running_mu[c] = state.momentum * state.running_mu[c] + (1.0 - state.momentum) * cache.mu[c];
            state.running_sigma[c] =
                state.momentum * state.running_sigma[c] + (1.0 - state.momentum) * cache.sigma[c];
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            cache.mu[c] = state.running_mu[c];
            cache.sigma[c] = state.running_sigma[c];
        }
    }
    for (std::size_t c = 0; c < C; ++c) cache.denom[c] = cache.sigma[c] + state.eps_bn;

    Tensor y(H.shape(), 0.0);
    for (std::size_t p = 0; p < count; ++p) {
        for (std::size_t c = 0; c < C; ++c) {
            y[p * C + c] = state.gamma[c] * (H[p * C + c] - cache.mu[c]) / cache.denom[c];
        }
    }
    return {std::move(y), std::move(cache)};
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& dl_dy) {
    require_same_shape(dl_dy, cache.H, "batchnorm_backward");
    const std::size_t C = cache.gamma.size();
    const std::size_t count = dl_dy.size() / C;
    const Tensor& H = cache.H;

    Tensor dgamma({C}, 0.0);
    Tensor dH(H.shape(), 0.0);
    std::vector<double> g_sum(C, 0.0), g_dev(C, 0.0);
    for (std::size_t p = 0; p < count; ++p) {
        for (std::size_t c = 0; c < C; ++c) {
            const double g = dl_dy[p * C + c];
            const double dev = H[p * C + c] - cache.mu[c];
            dgamma[c] += g * dev / cache.denom[c];
            g_sum[c] += g;
            g_dev[c] += g * dev;
        }
    }
    if (cache.mode == Mode::infer) {
        for (std::size_t p = 0; p < count; ++p) {
            for (std::size_t c = 0; c < C; ++c) dH[p * C + c] = dl_dy[p * C + c] * cache.gamma[c] / cache.denom[c];
        }
        return {std::move(dH), std::move(dgamma)};
    }
    // Through the batch mean and the batch std (dsigma/dH_j = (H_j - mu) / (n sigma)).
    const auto n = static_cast<double>(count);
    for (std::size_t p = 0; p < count; ++p) {
        for (std::size_t c = 0; c < C; ++c) {
            const double s = cache.denom[c];
            const double dev = H[p * C + c] - cache.mu[c];
            double v = (dl_dy[p * C + c] - g_sum[c] / n) / s;
            if (cache.sigma[c] > 0.0) v -= dev * g_dev[c] / (n * cache.sigma[c] * s * s);
            dH[p * C + c] = cache.gamma[c] * v;
        }
    }
    return {std::move(dH), std::move(dgamma)};
}

// Binarization ---------------------------------------------------------------------

Tensor binarize(const Tensor& x) {
    Tensor out(x.shape(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? 1.0 : 0.0;
    return out;
}

Tensor binarize_backward(const Tensor& dl_dy, const Tensor& x) {
    return errmodel::grad_clipped_ste(dl_dy, x, errmodel::ClipRange(0.0, 1.0));
}

// Pooling ---------------------------------------------------------------------------

MaxPoolOutput maxpool2x2(const Tensor& x) {
    const MapDims d = MapDims::of(x, "maxpool2x2");
    const std::size_t M2 = d.rows / 2, N2 = d.cols / 2, C = d.channels;
    if (M2 == 0 || N2 == 0) throw std::invalid_argument("maxpool2x2: spatial extent below 2");
    MaxPoolOutput out{Tensor(d.shape_with(M2, N2, C), 0.0), {}, x.shape()};
    out.argmax.resize(out.y.size());
    for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t i = 0; i < M2; ++i) {
            for (std::size_t j = 0; j < N2; ++j) {
                for (std::size_t c = 0; c < C; ++c) {
                    std::size_t best = ((b * d.rows + 2 * i) * d.cols + 2 * j) * C + c;
                    for (std::size_t di = 0; di < 2; ++di) {
                        for (std::size_t dj = 0; dj < 2; ++dj) {
                            const std::size_t off = ((b * d.rows + 2 * i + di) * d.cols + 2 * j + dj) * C + c;
                            if (x[off] > x[best]) best = off;
                        }
                    }
                    const std::size_t o = ((b * M2 + i) * N2 + j) * C + c;
                    out.y[o] = x[best];
                    out.argmax[o] = best;
                }
            }
        }
    }
    return out;
}

Tensor maxpool2x2_backward(const MaxPoolOutput& forward, const Tensor& dl_dy) {
    require_same_shape(dl_dy, forward.y, "maxpool2x2_backward");
    Tensor dx(forward.input_shape, 0.0);
    for (std::size_t o = 0; o < dl_dy.size(); ++o) dx[forward.argmax[o]] += dl_dy[o];
    return dx;
}

Tensor index_downsample(const Tensor& x) {
    const MapDims d = MapDims::of(x, "index_downsample");
    if (d.rows != 7 || d.cols != 7) {
        throw std::invalid_argument("index_downsample: expected 7x7 spatial extent, got " + shape_to_string(x.shape()));
    }
    const std::size_t C = d.channels;
    Tensor y(d.shape_with(3, 3, C), 0.0);
    for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double* src = x.data() + ((b * 7 + kDownsampleIndices[i]) * 7 + kDownsampleIndices[j]) * C;
                std::copy(src, src + C, y.data() + ((b * 3 + i) * 3 + j) * C);
            }
        }
    }
    return y;
}

Tensor index_downsample_backward(const Tensor& dl_dy, const Shape& input_shape) {
    Tensor dx(input_shape, 0.0);
    const MapDims d = MapDims::of(dx, "index_downsample_backward");
    if (dl_dy.shape() != d.shape_with(3, 3, d.channels)) {
        throw std::invalid_argument("index_downsample_backward: gradient shape mismatch");
    }
    const std::size_t C = d.channels;
    for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double* src = dl_dy.data() + ((b * 3 + i) * 3 + j) * C;
                std::copy(src, src + C, dx.data() + ((b * 7 + kDownsampleIndices[i]) * 7 + kDownsampleIndices[j]) * C);
            }
        }
    }
    return dx;
}

// Output layer ------------------------------------------------------------------------

Tensor softmax9(const Tensor& logits) {
    if (logits.size() % 9 != 0) throw std::invalid_argument("softmax9: expected [...,3,3]");
    Tensor p(logits.shape(), 0.0);
    for (std::size_t s = 0; s < logits.size() / 9; ++s) {
        const double* z = logits.data() + s * 9;
        double* out = p.data() + s * 9;
        const double zmax = *std::max_element(z, z + 9);
        double total = 0.0;
        for (int k = 0; k < 9; ++k) {
            out[k] = std::exp(z[k] - zmax);
            total += out[k];
        }
        for (int k = 0; k < 9; ++k) out[k] /= total;
    }
    return p;
}

OutputLayerResult weighted_channel_sum_softmax(const Tensor& a, const Tensor& w) {
    const MapDims d = MapDims::of(a, "weighted_channel_sum_softmax");
    if (d.rows != 3 || d.cols != 3) throw std::invalid_argument("weighted_channel_sum_softmax: expected 3x3 input");
    if (w.size() != d.channels) throw std::invalid_argument("weighted_channel_sum_softmax: weight length mismatch");
    const std::size_t C = d.channels;
    Shape logit_shape = d.batched ? Shape{d.batch, 3, 3} : Shape{3, 3};
    Tensor z(logit_shape, 0.0);
    for (std::size_t p = 0; p < z.size(); ++p) {
        const double* row = a.data() + p * C;
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) acc += w[c] * row[c];
        z[p] = acc;
    }
    Tensor probs = softmax9(z);
    return {std::move(z), std::move(probs), OutputLayerCache{a, w}};
}

OutputLayerGrads weighted_channel_sum_softmax_backward(const OutputLayerCache& cache, const Tensor& dl_dlogits) {
    const std::size_t C = cache.w.size();
    if (dl_dlogits.size() * C != cache.a.size()) {
        throw std::invalid_argument("weighted_channel_sum_softmax_backward: gradient shape mismatch");
    }
    Tensor da(cache.a.shape(), 0.0);
    Tensor dw({C}, 0.0);
    for (std::size_t p = 0; p < dl_dlogits.size(); ++p) {
        const double g = dl_dlogits[p];
        const double* row = cache.a.data() + p * C;
        double* drow = da.data() + p * C;
        for (std::size_t c = 0; c < C; ++c) {
            dw[c] += g * row[c];
            drow[c] = g * cache.w[c];
        }
    }
    return {std::move(da), std::move(dw)};
}

// Loss ------------------------------------------------------------------------------------

static std::size_t label_offset(const Tensor& p, LabelPos label) {
    if (p.shape() != Shape{3, 3}) throw std::invalid_argument("cross_entropy: expected a [3,3] probability map");
    if (label.row > 2 || label.col > 2) throw std::out_of_range("cross_entropy: label position outside 3x3");
    return label.row * 3 + label.col;
}

CrossEntropy cross_entropy(const Tensor& p, LabelPos label) {
    const double pl = p[label_offset(p, label)];
    if (pl < kProbabilityFloor) return {-std::log(kProbabilityFloor), true};
    return {-std::log(pl) + 0.0, false};
}

Tensor cross_entropy_logit_grad(const Tensor& p, LabelPos label) {
    Tensor g = p;
    g[label_offset(p, label)] -= 1.0;
    return g;
}

}  // namespace mixsig::layers
