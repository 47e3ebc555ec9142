#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "mixsig/errmodel.hpp"
#include "mixsig/rng.hpp"
#include "mixsig/tensor.hpp"

// Building blocks of the mixed-signal convolutional network. Feature maps are
// channel-last, [B, M, N, C]; the leading batch axis is optional everywhere
// ([M, N, C] is treated as B = 1 and keeps its rank on output).
namespace mixsig::layers {

enum class Mode { train, infer };

/// Batch/spatial/channel extents of a channel-last feature map.
struct MapDims {
    std::size_t batch = 1;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t channels = 0;
    bool batched = false;

    static MapDims of(const Tensor& x, const char* what);
    Shape shape_with(std::size_t rows, std::size_t cols, std::size_t channels) const;
};

// 3x3 zero-padded convolution ------------------------------------------------

struct ConvCache {
    Tensor input;    // a: [B, M, N, Q]
    Tensor kernels;  // W: [3, 3, Q, C]
};

/// Per-input-channel activations h [B, M, N, Q, C] and their channel sum
/// H [B, M, N, C].
struct ConvActivations {
    Tensor h;
    Tensor H;
    ConvCache cache;
};

struct ConvGrads {
    Tensor dl_da;
    Tensor dl_dW;
};

/// h[i,j,q,c] = sum over the 3x3 window of a[m,n,q] * W[m-i+1, n-j+1, q, c]
/// plus independent N(0, sigma^2) noise per (i, j, q, c), drawn in row-major
/// order of h.
ConvActivations conv3x3_noisy(const Tensor& a, const Tensor& kernels, double sigma, RngStream& rng);

/// Adjoint of conv3x3_noisy w.r.t. the pre-noise input and the kernels; the
/// noise node passes gradient unchanged.
ConvGrads conv3x3_backward(const ConvCache& cache, const Tensor& dl_dh);

/// Channel-summed convolution H without materializing h (noise-free).
Tensor conv3x3_summed(const Tensor& a, const Tensor& kernels);

/// Adjoint of conv3x3_summed. dl_da is left empty when `need_input_grad` is false.
ConvGrads conv3x3_summed_backward(const Tensor& a, const Tensor& kernels, const Tensor& dl_dH, bool need_input_grad);

/// Corruption applied to every per-channel activation h[i,j,q,c] before the
/// channel sum: additive noise, then optional stochastic quantization.
struct ElementCorruption {
    double sigma = 0.0;
    std::optional<errmodel::StochasticQuantizer> quantizer;
};

/// H = sum_q corrupt(h[., ., q, .]). Draws follow the row-major order of h, so
/// with no quantizer this equals channel_sum(conv3x3_noisy(...).h) exactly.
Tensor conv3x3_summed_corrupted(const Tensor& a, const Tensor& kernels, const ElementCorruption& corruption,
                                RngStream& rng);

// Channel summation ----------------------------------------------------------

Tensor channel_sum(const Tensor& h);
Tensor channel_sum_backward(const Tensor& dl_dH, std::size_t input_channels);

// Batch normalization ---------------------------------------------------------

struct BatchNormState {
    Tensor gamma;
    Tensor mu;     // statistics of the last training batch
    Tensor sigma;  // (population std)
    Tensor running_mu;
    Tensor running_sigma;
    double eps_bn = 1e-5;
    double momentum = 0.9;

    explicit BatchNormState(std::size_t channels);
    std::size_t channels() const noexcept { return gamma.size(); }
};

struct BatchNormCache {
    Mode mode = Mode::train;
    Tensor H;
    Tensor gamma;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<double> denom;  // sigma + eps_bn
};

struct BatchNormOutput {
    Tensor y;
    BatchNormCache cache;
};

struct BatchNormGrads {
    Tensor dl_dH;
    Tensor dl_dgamma;
};

/// y = gamma * (H - mu) / (sigma + eps_bn) per channel. Train mode pools
/// statistics over batch and spatial axes and updates the running estimates;
/// infer mode uses the running estimates.
BatchNormOutput batchnorm(const Tensor& H, BatchNormState& state, Mode mode);
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& dl_dy);

// Binarization ----------------------------------------------------------------

/// 1 where x > 0, else 0.
Tensor binarize(const Tensor& x);
/// Clipped straight-through estimator over (0, 1).
Tensor binarize_backward(const Tensor& dl_dy, const Tensor& x);

// Pooling and down-sampling ---------------------------------------------------

struct MaxPoolOutput {
    Tensor y;
    std::vector<std::size_t> argmax;  // flat input offset per output element
    Shape input_shape;
};

/// Non-overlapping 2x2 max; ties resolve to the first element in row-major order.
MaxPoolOutput maxpool2x2(const Tensor& x);
Tensor maxpool2x2_backward(const MaxPoolOutput& forward, const Tensor& dl_dy);

/// Zero-based rows/cols {1, 4, 6} of a 7x7 map.
inline constexpr std::size_t kDownsampleIndices[3] = {1, 4, 6};

Tensor index_downsample(const Tensor& x);
Tensor index_downsample_backward(const Tensor& dl_dy, const Shape& input_shape);

// Output layer ----------------------------------------------------------------

struct OutputLayerCache {
    Tensor a;  // [B, 3, 3, C]
    Tensor w;  // [C]
};

struct OutputLayerResult {
    Tensor logits;  // [B, 3, 3]
    Tensor probs;   // [B, 3, 3], softmax over the 9 positions per sample
    OutputLayerCache cache;
};

struct OutputLayerGrads {
    Tensor dl_da;
    Tensor dl_dw;
};

OutputLayerResult weighted_channel_sum_softmax(const Tensor& a, const Tensor& w);
/// Backward from the gradient w.r.t. the pre-softmax logits.
OutputLayerGrads weighted_channel_sum_softmax_backward(const OutputLayerCache& cache, const Tensor& dl_dlogits);

/// Numerically stable softmax over the last two axes ([B, 3, 3] or [3, 3]).
Tensor softmax9(const Tensor& logits);

// Loss ------------------------------------------------------------------------

struct LabelPos {
    std::size_t row;
    std::size_t col;
};

struct CrossEntropy {
    double loss = 0.0;
    bool clamped = false;  // p[label] fell below the 1e-12 floor
};

inline constexpr double kProbabilityFloor = 1e-12;

CrossEntropy cross_entropy(const Tensor& p, LabelPos label);
/// p - onehot(label): gradient of the loss w.r.t. the pre-softmax logits.
Tensor cross_entropy_logit_grad(const Tensor& p, LabelPos label);

}  // namespace mixsig::layers
