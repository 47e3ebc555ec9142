#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixsig/data.hpp"
#include "mixsig/errmodel.hpp"
#include "mixsig/kernel_set.hpp"
#include "mixsig/layers.hpp"

// The four-layer all-convolutional MCNN: three binary conv blocks feeding a
// weighted channel sum over a 3x3 grid of class positions.
namespace mixsig::model {

inline constexpr std::size_t kConvLayers = 3;
inline constexpr std::array<std::size_t, kConvLayers> kBaseChannels = {64, 128, 256};
inline constexpr std::size_t kImageSide = 28;

/// Uniform channel scaling num/den applied to kBaseChannels.
struct ArchScale {
    std::int64_t num = 1;
    std::int64_t den = 1;

    /// Accepts "1", "1/4", "0.25".
    static ArchScale parse(const std::string& text);
    std::string to_string() const;
    /// round(base * num / den); throws std::invalid_argument below 1.
    std::size_t channels(std::size_t base) const;
    bool operator==(const ArchScale& o) const noexcept { return num * o.den == o.num * den; }
};

struct McnnModel {
    ArchScale scale;
    std::array<Tensor, kConvLayers> latent_kernels;  // [3, 3, Q, C]
    std::vector<layers::BatchNormState> bn;          // one per conv layer
    Tensor layer4_weights;                           // [C3]
    bool binary_layer4 = false;
    /// Layers 1-3 emit 1 where the batch-norm output exceeds this value.
    double binarize_threshold = 0.0;
    std::array<int, data::kNumClasses> class_map = data::kClassDigits;
    /// Free-form provenance carried into the model file.
    std::map<std::string, std::string> metadata;

    std::size_t channels(std::size_t layer) const { return latent_kernels.at(layer).extent(3); }
};

/// Latent kernels uniform in [-1, 1], gamma = 1, neutral running statistics,
/// layer-4 weights uniform in [-0.1, 0.1].
McnnModel build(ArchScale scale, std::uint64_t seed);

/// Bitwise equality of every parameter and running statistic.
bool parameters_equal(const McnnModel& a, const McnnModel& b);

// Error configuration -----------------------------------------------------------

struct ActivationQuant {
    int levels = 8;
    double lo = 0.0;
    double hi = 9.0;
};

struct ErrorConfig {
    errmodel::DiscreteSet input_set = errmodel::DiscreteSet::scalars({0.0, 1.0});
    KernelSet kernel_set;
    double train_sigma = 0.5;
    double eval_sigma = 0.0;
    /// Fresh residue perturbation of the kernel set per evaluation run.
    double residue_rmse = 0.0;
    /// Stochastic quantization of every per-channel activation before the sum.
    std::optional<ActivationQuant> activation_quant;
    /// Draw noise per (pixel, q, c) instead of one N(0, Q sigma^2) draw per
    /// summed activation. Same distribution, Q times the draws.
    bool per_element_noise = false;

    /// Throws std::invalid_argument on negative sigmas/rmse or an empty kernel set.
    void validate() const;
};

// Forward / backward ------------------------------------------------------------

/// Kernels actually used by one forward pass.
struct EffectiveKernels {
    std::array<Tensor, kConvLayers> weights;                 // [3, 3, Q, C]
    std::array<std::vector<std::uint16_t>, kConvLayers> index;  // chosen entry per (q, c)
    errmodel::ClipRange clip{0.0, 1.0};
};

/// Maps each latent 3x3 kernel to its L1-nearest entry of `select`. The
/// convolution uses the same entry of `realized` (defaults to `select`), so a
/// perturbed device can be simulated behind a calibrated selection.
EffectiveKernels discretize(const McnnModel& model, const KernelSet& select, const KernelSet* realized = nullptr);

/// Latent kernels used as-is (smooth surrogate).
EffectiveKernels passthrough_kernels(const McnnModel& model);

struct ForwardSpec {
    layers::Mode mode = layers::Mode::infer;
    double sigma = 0.0;
    /// Smooth surrogate: sigmoid instead of binarize, no discretization, no noise.
    bool surrogate = false;
};

struct LayerCache {
    Tensor input;  // a, [B, M, N, Q]
    layers::BatchNormCache bn;
    Tensor bn_out;
    Tensor activation;  // binarized (or sigmoid) map before pooling
    std::optional<layers::MaxPoolOutput> pool;
    Shape pre_downsample_shape;
};

struct ForwardCache {
    std::array<LayerCache, kConvLayers> layers;
    layers::OutputLayerCache output;
    Tensor layer4_used;
    bool surrogate = false;
    std::size_t batch = 0;
};

struct ForwardResult {
    Tensor probs;  // [B, 3, 3]
    Tensor logits;
    ForwardCache cache;
};

/// images: [B, 28, 28] with values in err.input_set.
ForwardResult forward(McnnModel& model, const Tensor& images, const EffectiveKernels& kernels, const ErrorConfig& err,
                      const ForwardSpec& spec, RngStream& rng);

struct Gradients {
    std::array<Tensor, kConvLayers> kernels;
    std::array<Tensor, kConvLayers> gamma;
    Tensor layer4;
};

/// Mean cross-entropy over the batch; clamped samples are counted.
struct BatchLoss {
    double loss = 0.0;
    std::size_t clamped = 0;
};
BatchLoss batch_loss(const Tensor& probs, const std::vector<std::uint8_t>& labels);

/// Gradients of batch_loss. Latent-kernel gradients pass the discretization
/// through a clipped STE over kernels.clip (surrogate: unmasked).
Gradients backward(const McnnModel& model, const ForwardCache& cache, const EffectiveKernels& kernels,
                   const Tensor& probs, const std::vector<std::uint8_t>& labels);

/// Row-major position of a class id on the 3x3 output.
layers::LabelPos position_of(std::uint8_t class_id);
/// Argmax over the 9 positions of each sample; ties go to the lowest position.
std::vector<std::uint8_t> predict(const Tensor& probs);

// Training ----------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    /// Train without activation noise (the plain BNN reference).
    bool baseline_mode = false;

    void validate() const;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;  // NaN without a validation set
};

struct TrainResult {
    McnnModel model;
    std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam on latent kernels, gammas and layer-4 weights. Latent kernels are kept
/// inside the kernel set's value range. Validation accuracy is
/// one run at err.eval_sigma. Throws std::runtime_error on a non-finite loss.
TrainResult train(McnnModel model, const data::Dataset& train_set, const data::Dataset* val_set,
                  const TrainConfig& cfg, const ErrorConfig& err, const EpochCallback& on_epoch = {});

// Evaluation --------------------------------------------------------------------

inline constexpr std::size_t kDefaultRuns = 7;
inline constexpr std::size_t kEvalBatch = 250;

struct EvalResult {
    double mean_acc = 0.0;
    double std_acc = 0.0;  // population std over runs
    std::vector<double> run_acc;
    std::vector<double> residue_achieved;  // per run, when residue_rmse > 0
};

EvalResult evaluate(const McnnModel& model, const data::Dataset& ds, const ErrorConfig& err,
                    std::size_t runs = kDefaultRuns, std::uint64_t seed = 0);

// Serialization -----------------------------------------------------------------

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save(const McnnModel& model, const std::filesystem::path& path);
/// Throws std::runtime_error on a corrupt, truncated or wrong-version file, or
/// when `expected_scale` is given and differs from the stored one.
McnnModel load(const std::filesystem::path& path, std::optional<ArchScale> expected_scale = std::nullopt);

std::string serialize(const McnnModel& model);
McnnModel deserialize(const std::string& bytes, std::optional<ArchScale> expected_scale = std::nullopt);

}  // namespace mixsig::model
