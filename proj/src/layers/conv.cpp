#include <algorithm>
#include <stdexcept>

#include "mixsig/layers.hpp"

namespace mixsig::layers {

namespace {

struct ConvDims {
    MapDims in;
    std::size_t out_channels = 0;
};

ConvDims conv_dims(const Tensor& a, const Tensor& kernels) {
    const MapDims in = MapDims::of(a, "conv3x3 input");
    if (kernels.rank() != 4 || kernels.extent(0) != 3 || kernels.extent(1) != 3) {
        throw std::invalid_argument("conv3x3: kernels must be [3,3,Q,C], got " + shape_to_string(kernels.shape()));
    }
    if (kernels.extent(2) != in.channels) {
        throw std::invalid_argument("conv3x3: kernel input channels " + std::to_string(kernels.extent(2)) +
                                    " vs input channels " + std::to_string(in.channels));
    }
    return {in, kernels.extent(3)};
}

// Visit every (output pixel, kernel tap) pair that lands inside the input.
template <typename Fn>
void for_each_tap(const MapDims& d, Fn&& fn) {
    const auto M = static_cast<long>(d.rows);
    const auto N = static_cast<long>(d.cols);
    for (std::size_t b = 0; b < d.batch; ++b) {
        for (long i = 0; i < M; ++i) {
            for (long j = 0; j < N; ++j) {
                const std::size_t out_pix = (b * d.rows + i) * d.cols + j;
                for (long dm = 0; dm < 3; ++dm) {
                    const long m = i + dm - 1;
                    if (m < 0 || m >= M) continue;
                    for (long dn = 0; dn < 3; ++dn) {
                        const long n = j + dn - 1;
                        if (n < 0 || n >= N) continue;
                        const std::size_t in_pix = (b * d.rows + m) * d.cols + n;
                        fn(out_pix, in_pix, static_cast<std::size_t>(dm * 3 + dn));
                    }
                }
            }
        }
    }
}

}  // namespace

ConvActivations conv3x3_noisy(const Tensor& a, const Tensor& kernels, double sigma, RngStream& rng) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("conv3x3_noisy: sigma must be >= 0");
    const auto [in, C] = conv_dims(a, kernels);
    const std::size_t Q = in.channels;

    Shape h_shape = in.shape_with(in.rows, in.cols, Q);
    h_shape.push_back(C);
    Tensor h(h_shape, 0.0);
    const double* A = a.data();
    const double* W = kernels.data();
    double* Hq = h.data();
    for_each_tap(in, [&](std::size_t out_pix, std::size_t in_pix, std::size_t tap) {
        const double* arow = A + in_pix * Q;
        double* hrow = Hq + out_pix * Q * C;
        const double* wtap = W + tap * Q * C;
        for (std::size_t q = 0; q < Q; ++q) {
            const double av = arow[q];
            if (av == 0.0) continue;
            const double* w = wtap + q * C;
            double* o = hrow + q * C;
            for (std::size_t c = 0; c < C; ++c) o[c] += av * w[c];
        }
    });
    if (sigma > 0.0) {
        for (auto& v : h.values()) v += sigma * rng.normal();
    }
    Tensor H = channel_sum(h);
    return {std::move(h), std::move(H), ConvCache{a, kernels}};
}

ConvGrads conv3x3_backward(const ConvCache& cache, const Tensor& dl_dh) {
    if (cache.input.empty() || cache.kernels.empty()) throw std::invalid_argument("conv3x3_backward: empty cache");
    const auto [in, C] = conv_dims(cache.input, cache.kernels);
    const std::size_t Q = in.channels;
    Shape expect = in.shape_with(in.rows, in.cols, Q);
    expect.push_back(C);
    if (dl_dh.shape() != expect) {
        throw std::invalid_argument("conv3x3_backward: gradient shape " + shape_to_string(dl_dh.shape()) +
                                    " does not match cached forward " + shape_to_string(expect));
    }
    Tensor da(cache.input.shape(), 0.0);
    Tensor dW(cache.kernels.shape(), 0.0);
    const double* A = cache.input.data();
    const double* W = cache.kernels.data();
    const double* G = dl_dh.data();
    for_each_tap(in, [&](std::size_t out_pix, std::size_t in_pix, std::size_t tap) {
        const double* arow = A + in_pix * Q;
        double* darow = da.data() + in_pix * Q;
        const double* grow = G + out_pix * Q * C;
        for (std::size_t q = 0; q < Q; ++q) {
            const double* g = grow + q * C;
            const double* w = W + (tap * Q + q) * C;
            double* dw = dW.data() + (tap * Q + q) * C;
            const double av = arow[q];
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                dw[c] += av * g[c];
                acc += w[c] * g[c];
            }
            darow[q] += acc;
        }
    });
    return {std::move(da), std::move(dW)};
}

Tensor conv3x3_summed(const Tensor& a, const Tensor& kernels) {
    const auto [in, C] = conv_dims(a, kernels);
    const std::size_t Q = in.channels;
    Tensor H(in.shape_with(in.rows, in.cols, C), 0.0);
    const double* A = a.data();
    const double* W = kernels.data();
    double* out = H.data();
    for_each_tap(in, [&](std::size_t out_pix, std::size_t in_pix, std::size_t tap) {
        const double* arow = A + in_pix * Q;
        double* o = out + out_pix * C;
        const double* wtap = W + tap * Q * C;
        for (std::size_t q = 0; q < Q; ++q) {
            const double av = arow[q];
            if (av == 0.0) continue;
            const double* w = wtap + q * C;
            for (std::size_t c = 0; c < C; ++c) o[c] += av * w[c];
        }
    });
    return H;
}

ConvGrads conv3x3_summed_backward(const Tensor& a, const Tensor& kernels, const Tensor& dl_dH, bool need_input_grad) {
    const auto [in, C] = conv_dims(a, kernels);
    const std::size_t Q = in.channels;
    if (dl_dH.shape() != in.shape_with(in.rows, in.cols, C)) {
        throw std::invalid_argument("conv3x3_summed_backward: gradient shape " + shape_to_string(dl_dH.shape()) +
                                    " does not match forward");
    }
    Tensor dW(kernels.shape(), 0.0);
    Tensor da = need_input_grad ? Tensor(a.shape(), 0.0) : Tensor();
    const double* A = a.data();
    const double* W = kernels.data();
    const double* G = dl_dH.data();
    for_each_tap(in, [&](std::size_t out_pix, std::size_t in_pix, std::size_t tap) {
        const double* arow = A + in_pix * Q;
        const double* g = G + out_pix * C;
        double* dwtap = dW.data() + tap * Q * C;
        for (std::size_t q = 0; q < Q; ++q) {
            const double av = arow[q];
            if (av == 0.0) continue;
            double* dw = dwtap + q * C;
            for (std::size_t c = 0; c < C; ++c) dw[c] += av * g[c];
        }
        if (need_input_grad) {
            double* darow = da.data() + in_pix * Q;
            const double* wtap = W + tap * Q * C;
            for (std::size_t q = 0; q < Q; ++q) {
                const double* w = wtap + q * C;
                double acc = 0.0;
                for (std::size_t c = 0; c < C; ++c) acc += w[c] * g[c];
                darow[q] += acc;
            }
        }
    });
    return {std::move(da), std::move(dW)};
}

Tensor conv3x3_summed_corrupted(const Tensor& a, const Tensor& kernels, const ElementCorruption& corruption,
                                RngStream& rng) {
    if (!(corruption.sigma >= 0.0)) throw std::invalid_argument("conv3x3_summed_corrupted: sigma must be >= 0");
    const auto [in, C] = conv_dims(a, kernels);
    const std::size_t Q = in.channels;
    Tensor H(in.shape_with(in.rows, in.cols, C), 0.0);
    std::vector<double> hq(Q * C);
    const double* A = a.data();
    const double* W = kernels.data();
    const auto M = static_cast<long>(in.rows);
    const auto N = static_cast<long>(in.cols);
    for (std::size_t b = 0; b < in.batch; ++b) {
        for (long i = 0; i < M; ++i) {
            for (long j = 0; j < N; ++j) {
                std::fill(hq.begin(), hq.end(), 0.0);
                for (long dm = 0; dm < 3; ++dm) {
                    const long m = i + dm - 1;
                    if (m < 0 || m >= M) continue;
                    for (long dn = 0; dn < 3; ++dn) {
                        const long n = j + dn - 1;
                        if (n < 0 || n >= N) continue;
                        const double* arow = A + ((b * in.rows + m) * in.cols + n) * Q;
                        const double* wtap = W + static_cast<std::size_t>(dm * 3 + dn) * Q * C;
                        for (std::size_t q = 0; q < Q; ++q) {
                            const double av = arow[q];
                            if (av == 0.0) continue;
                            const double* w = wtap + q * C;
                            double* o = hq.data() + q * C;
                            for (std::size_t c = 0; c < C; ++c) o[c] += av * w[c];
                        }
                    }
                }
                if (corruption.sigma > 0.0) {
                    for (auto& v : hq) v += corruption.sigma * rng.normal();
                }
                if (corruption.quantizer) {
                    for (auto& v : hq) v = corruption.quantizer->apply(v, rng);
                }
                double* out = H.data() + ((b * in.rows + i) * in.cols + j) * C;
                for (std::size_t q = 0; q < Q; ++q) {
                    for (std::size_t c = 0; c < C; ++c) out[c] += hq[q * C + c];
                }
            }
        }
    }
    return H;
}

}  // namespace mixsig::layers
