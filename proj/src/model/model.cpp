#include "mixsig/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mixsig/stats.hpp"

namespace mixsig::model {

namespace {

// Leading coordinate of every random stream the model draws from.
enum Purpose : std::uint64_t { kInit = 1, kShuffle = 2, kTrainNoise = 3, kResidue = 4, kEvalNoise = 5 };

Tensor shifted(const Tensor& x, double by) {
    if (by == 0.0) return x;
    Tensor out = x;
    for (auto& v : out.values()) v += by;
    return out;
}

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

// ArchScale ------------------------------------------------------------------------

ArchScale ArchScale::parse(const std::string& text) {
    const auto parse_int = [&](std::string_view s) {
        std::int64_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v <= 0) {
            throw std::invalid_argument("bad architecture scale '" + text + "'");
        }
        return v;
    };
    ArchScale s;
    if (const auto slash = text.find('/'); slash != std::string::npos) {
        s.num = parse_int(std::string_view(text).substr(0, slash));
        s.den = parse_int(std::string_view(text).substr(slash + 1));
    } else if (text.find('.') != std::string::npos) {
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !(v > 0.0)) {
            throw std::invalid_argument("bad architecture scale '" + text + "'");
        }
        s.den = 1'000'000;
        s.num = std::llround(v * static_cast<double>(s.den));
        if (s.num <= 0) throw std::invalid_argument("architecture scale '" + text + "' rounds to zero");
    } else {
        s.num = parse_int(text);
    }
    const std::int64_t g = std::gcd(s.num, s.den);
    s.num /= g;
    s.den /= g;
    return s;
}

std::string ArchScale::to_string() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

std::size_t ArchScale::channels(std::size_t base) const {
    if (num <= 0 || den <= 0) throw std::invalid_argument("architecture scale must be positive");
    const auto c = std::llround(static_cast<double>(base) * static_cast<double>(num) / static_cast<double>(den));
    if (c < 1) throw std::invalid_argument("architecture scale " + to_string() + " leaves no channels");
    return static_cast<std::size_t>(c);
}

// Construction ---------------------------------------------------------------------

McnnModel build(ArchScale scale, std::uint64_t seed) {
    McnnModel m;
    m.scale = scale;
    std::size_t q = 1;
    for (std::size_t k = 0; k < kConvLayers; ++k) {
        const std::size_t c = scale.channels(kBaseChannels[k]);
        RngStream rng(seed, RngStream::stream_id_for({kInit, k}));
        Tensor w({3, 3, q, c}, 0.0);
        for (auto& v : w.values()) v = 2.0 * rng.uniform() - 1.0;
        m.latent_kernels[k] = std::move(w);
        m.bn.emplace_back(c);
        q = c;
    }
    RngStream rng(seed, RngStream::stream_id_for({kInit, kConvLayers}));
    m.layer4_weights = Tensor({q}, 0.0);
    for (auto& v : m.layer4_weights.values()) v = 0.2 * rng.uniform() - 0.1;
    return m;
}

bool parameters_equal(const McnnModel& a, const McnnModel& b) {
    const auto same = [](const Tensor& x, const Tensor& y) {
        return x.shape() == y.shape() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
    };
    if (!(a.scale == b.scale) || a.binary_layer4 != b.binary_layer4 || a.binarize_threshold != b.binarize_threshold || a.class_map != b.class_map) return false;
    if (a.bn.size() != b.bn.size() || !same(a.layer4_weights, b.layer4_weights)) return false;
    for (std::size_t k = 0; k < kConvLayers; ++k) {
        if (!same(a.latent_kernels[k], b.latent_kernels[k])) return false;
    }
    for (std::size_t k = 0; k < a.bn.size(); ++k) {
        const auto &x = a.bn[k], &y = b.bn[k];
        if (!same(x.gamma, y.gamma) || !same(x.mu, y.mu) || !same(x.sigma, y.sigma) ||
            !same(x.running_mu, y.running_mu) || !same(x.running_sigma, y.running_sigma) || x.eps_bn != y.eps_bn ||
            x.momentum != y.momentum) {
            return false;
        }
    }
    return true;
}

void ErrorConfig::validate() const {
    if (!(train_sigma >= 0.0) || !(eval_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
    if (!(residue_rmse >= 0.0)) throw std::invalid_argument("residue rmse must be >= 0");
    if (kernel_set.entries.empty()) throw std::invalid_argument("error config has an empty kernel set");
    if (input_set.empty()) throw std::invalid_argument("error config has an empty input set");
    if (activation_quant) (void)errmodel::StochasticQuantizer(activation_quant->levels, activation_quant->lo,
                                                              activation_quant->hi);
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("Adam betas must lie in [0, 1)");
    }
}

// Kernels --------------------------------------------------------------------------

EffectiveKernels discretize(const McnnModel& model, const KernelSet& select, const KernelSet* realized) {
    if (select.entries.empty()) throw std::invalid_argument("discretize: empty kernel set");
    const KernelSet& device = realized ? *realized : select;
    if (device.size() != select.size()) throw std::invalid_argument("discretize: realized set size mismatch");
    const auto [lo, hi] = select.value_range();
    EffectiveKernels out;
    out.clip = errmodel::ClipRange(lo, hi);
    for (std::size_t k = 0; k < kConvLayers; ++k) {
        const Tensor& latent = model.latent_kernels[k];
        const std::size_t Q = latent.extent(2);
        const std::size_t C = latent.extent(3);
        Tensor w(latent.shape(), 0.0);
        auto& index = out.index[k];
        index.resize(Q * C);
        std::array<double, kKernelTaps> taps{};
        for (std::size_t q = 0; q < Q; ++q) {
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t t = 0; t < kKernelTaps; ++t) taps[t] = latent[(t * Q + q) * C + c];
                const std::size_t best = select.nearest(taps);
                index[q * C + c] = static_cast<std::uint16_t>(best);
                const auto& eff = device.entries[best].effective;
                for (std::size_t t = 0; t < kKernelTaps; ++t) w[(t * Q + q) * C + c] = eff[t];
            }
        }
        out.weights[k] = std::move(w);
    }
    return out;
}

EffectiveKernels passthrough_kernels(const McnnModel& model) {
    EffectiveKernels out;
    out.weights = model.latent_kernels;
    return out;
}

// Forward --------------------------------------------------------------------------

ForwardResult forward(McnnModel& model, const Tensor& images, const EffectiveKernels& kernels, const ErrorConfig& err,
                      const ForwardSpec& spec, RngStream& rng) {
    if (images.rank() != 3 || images.extent(1) != kImageSide || images.extent(2) != kImageSide) {
        throw std::invalid_argument("forward: expected images [B,28,28], got " + shape_to_string(images.shape()));
    }
    if (!(spec.sigma >= 0.0)) throw std::invalid_argument("forward: sigma must be >= 0");
    if (!spec.surrogate && err.input_set.is_scalar()) {
        const auto& members = err.input_set.members();
        for (std::size_t i = 0; i < images.size(); ++i) {
            const double v = images[i];
            const bool ok = std::any_of(members.begin(), members.end(), [v](const Tensor& m) { return m[0] == v; });
            if (!ok) throw std::invalid_argument("forward: input element " + std::to_string(i) + " is not in the input set");
        }
    }
    const std::size_t B = images.extent(0);
    ForwardResult res;
    ForwardCache& cache = res.cache;
    cache.surrogate = spec.surrogate;
    cache.batch = B;

    const double sigma = spec.surrogate ? 0.0 : spec.sigma;
    const bool literal = !spec.surrogate && (err.per_element_noise || err.activation_quant);
    Tensor a = images.reshaped({B, kImageSide, kImageSide, 1});
    for (std::size_t k = 0; k < kConvLayers; ++k) {
        LayerCache& lc = cache.layers[k];
        const Tensor& W = kernels.weights[k];
        const std::size_t Q = a.extent(3);
        Tensor H;
        if (literal) {
            layers::ElementCorruption corruption{sigma, std::nullopt};
            if (err.activation_quant) {
                corruption.quantizer.emplace(err.activation_quant->levels, err.activation_quant->lo,
                                             err.activation_quant->hi);
            }
            H = layers::conv3x3_summed_corrupted(a, W, corruption, rng);
        } else {
            H = layers::conv3x3_summed(a, W);
            if (sigma > 0.0) {
                // Q independent N(0, sigma^2) terms per summed activation.
                const double s = sigma * std::sqrt(static_cast<double>(Q));
                for (auto& v : H.values()) v += s * rng.normal();
            }
        }
        auto bn = layers::batchnorm(H, model.bn[k], spec.mode);
        Tensor act;
        if (spec.surrogate) {
            act = bn.y;
            for (auto& v : act.values()) v = sigmoid(v);
        } else {
            act = layers::binarize(shifted(bn.y, -model.binarize_threshold));
        }
        lc.input = std::move(a);
        lc.bn = std::move(bn.cache);
        lc.bn_out = std::move(bn.y);
        if (k + 1 < kConvLayers) {
            auto pool = layers::maxpool2x2(act);
            a = pool.y;
            lc.pool = std::move(pool);
        } else {
            lc.pre_downsample_shape = act.shape();
            a = layers::index_downsample(act);
        }
        lc.activation = std::move(act);
    }

    Tensor w4 = model.layer4_weights;
    if (model.binary_layer4) {
        for (auto& v : w4.values()) v = v >= 0.0 ? 1.0 : -1.0;
    }
    auto out = layers::weighted_channel_sum_softmax(a, w4);
    cache.output = std::move(out.cache);
    cache.layer4_used = std::move(w4);
    res.probs = std::move(out.probs);
    res.logits = std::move(out.logits);
    return res;
}

layers::LabelPos position_of(std::uint8_t class_id) {
    if (class_id >= data::kNumClasses) throw std::out_of_range("class id " + std::to_string(class_id) + " out of range");
    return {class_id / 3u, class_id % 3u};
}

std::vector<std::uint8_t> predict(const Tensor& probs) {
    const std::size_t B = probs.size() / data::kNumClasses;
    std::vector<std::uint8_t> out(B);
    for (std::size_t b = 0; b < B; ++b) {
        const double* p = probs.data() + b * data::kNumClasses;
        out[b] = static_cast<std::uint8_t>(std::max_element(p, p + data::kNumClasses) - p);
    }
    return out;
}

BatchLoss batch_loss(const Tensor& probs, const std::vector<std::uint8_t>& labels) {
    const std::size_t B = labels.size();
    if (B == 0 || probs.size() != B * data::kNumClasses) throw std::invalid_argument("batch_loss: label count mismatch");
    BatchLoss out;
    for (std::size_t b = 0; b < B; ++b) {
        const double p = probs[b * data::kNumClasses + labels[b]];
        if (p < layers::kProbabilityFloor) {
            out.loss -= std::log(layers::kProbabilityFloor);
            ++out.clamped;
        } else {
            out.loss -= std::log(p);
        }
    }
    out.loss /= static_cast<double>(B);
    return out;
}

// Backward -------------------------------------------------------------------------

Gradients backward(const McnnModel& model, const ForwardCache& cache, const EffectiveKernels& kernels,
                   const Tensor& probs, const std::vector<std::uint8_t>& labels) {
    const std::size_t B = cache.batch;
    if (labels.size() != B || probs.size() != B * data::kNumClasses || cache.output.a.empty()) {
        throw std::invalid_argument("backward: cache does not match this batch");
    }
    if (cache.layer4_used.size() != model.layer4_weights.size()) {
        throw std::invalid_argument("backward: cache was produced by a different model");
    }
    Gradients g;
    Tensor dlogits = probs.reshaped({B, 3, 3});
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        if (labels[b] >= data::kNumClasses) throw std::out_of_range("backward: label out of range");
        dlogits[b * data::kNumClasses + labels[b]] -= 1.0;
    }
    for (auto& v : dlogits.values()) v *= inv_b;

    auto og = layers::weighted_channel_sum_softmax_backward(cache.output, dlogits);
    g.layer4 = model.binary_layer4
                   ? errmodel::grad_clipped_ste(og.dl_dw, model.layer4_weights, errmodel::ClipRange(-1.0, 1.0))
                   : std::move(og.dl_dw);
    Tensor da = std::move(og.dl_da);

    for (std::size_t k = kConvLayers; k-- > 0;) {
        const LayerCache& lc = cache.layers[k];
        Tensor dact = lc.pool ? layers::maxpool2x2_backward(*lc.pool, da)
                              : layers::index_downsample_backward(da, lc.pre_downsample_shape);
        Tensor dy;
        if (cache.surrogate) {
            dy = std::move(dact);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const double s = lc.activation[i];
                dy[i] *= s * (1.0 - s);
            }
        } else {
            dy = layers::binarize_backward(dact, shifted(lc.bn_out, -model.binarize_threshold));
        }
        auto bg = layers::batchnorm_backward(lc.bn, dy);
        g.gamma[k] = std::move(bg.dl_dgamma);
        auto cg = layers::conv3x3_summed_backward(lc.input, kernels.weights[k], bg.dl_dH, k > 0);
        g.kernels[k] = cache.surrogate ? std::move(cg.dl_dW)
                                       : errmodel::grad_clipped_ste(cg.dl_dW, model.latent_kernels[k], kernels.clip);
        da = std::move(cg.dl_da);
    }
    return g;
}

// Training -------------------------------------------------------------------------

namespace {

class Adam {
public:
    Adam(const TrainConfig& cfg, const McnnModel& m) : cfg_(cfg) {
        for (std::size_t k = 0; k < kConvLayers; ++k) {
            add(m.latent_kernels[k]);
            add(m.bn[k].gamma);
        }
        add(m.layer4_weights);
    }

    void step(McnnModel& m, const Gradients& g) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        std::size_t slot = 0;
        for (std::size_t k = 0; k < kConvLayers; ++k) {
            update(slot++, m.latent_kernels[k], g.kernels[k], c1, c2);
            update(slot++, m.bn[k].gamma, g.gamma[k], c1, c2);
        }
        update(slot, m.layer4_weights, g.layer4, c1, c2);
    }

private:
    void add(const Tensor& p) {
        m_.emplace_back(p.shape(), 0.0);
        v_.emplace_back(p.shape(), 0.0);
    }

    void update(std::size_t slot, Tensor& p, const Tensor& g, double c1, double c2) {
        require_same_shape(p, g, "adam update");
        Tensor& m = m_[slot];
        Tensor& v = v_[slot];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            p[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_eps);
        }
    }

    TrainConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::uint64_t t_ = 0;
};

// Latents outside the kernel set's value range get no gradient through the
// clipped STE, so training keeps them just inside it.
void clamp_latents(McnnModel& m, const KernelSet& set) {
    const auto [lo, hi] = set.value_range();
    const double margin = 1e-6 * (hi - lo);
    for (auto& w : m.latent_kernels) {
        for (auto& v : w.values()) v = std::clamp(v, lo + margin, hi - margin);
    }
}

}  // namespace

TrainResult train(McnnModel model, const data::Dataset& train_set, const data::Dataset* val_set,
                  const TrainConfig& cfg, const ErrorConfig& err, const EpochCallback& on_epoch) {
    cfg.validate();
    err.validate();
    if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
    const double sigma = cfg.baseline_mode ? 0.0 : err.train_sigma;
    Adam adam(cfg, model);
    clamp_latents(model, err.kernel_set);
    TrainResult result;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        RngStream shuffle(cfg.seed, RngStream::stream_id_for({kShuffle, epoch}));
        data::BatchIterator it(train_set, cfg.batch_size, shuffle, true);
        data::Batch batch;
        double loss_sum = 0.0;
        std::size_t step = 0;
        while (it.next(batch)) {
            const EffectiveKernels ek = discretize(model, err.kernel_set);
            RngStream noise(cfg.seed, RngStream::stream_id_for({kTrainNoise, epoch, step}));
            ForwardResult fr = forward(model, batch.images, ek, err, {layers::Mode::train, sigma, false}, noise);
            const BatchLoss bl = batch_loss(fr.probs, batch.labels);
            if (!std::isfinite(bl.loss)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", step " + std::to_string(step));
            }
            const Gradients g = backward(model, fr.cache, ek, fr.probs, batch.labels);
            adam.step(model, g);
            clamp_latents(model, err.kernel_set);
            loss_sum += bl.loss * static_cast<double>(batch.labels.size());
            ++step;
        }
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(train_set.size());
        log.val_acc = val_set && val_set->size() > 0 ? evaluate(model, *val_set, err, 1, cfg.seed).mean_acc
                                                     : std::numeric_limits<double>::quiet_NaN();
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    result.model = std::move(model);
    return result;
}

// Evaluation -----------------------------------------------------------------------

EvalResult evaluate(const McnnModel& model, const data::Dataset& ds, const ErrorConfig& err, std::size_t runs,
                    std::uint64_t seed) {
    if (runs == 0) throw std::invalid_argument("evaluate: runs must be >= 1");
    err.validate();
    if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    McnnModel m = model;  // infer-mode batchnorm leaves it untouched
    const bool random = err.eval_sigma > 0.0 || err.activation_quant || err.residue_rmse > 0.0;
    const EffectiveKernels nominal = discretize(m, err.kernel_set);

    EvalResult res;
    for (std::size_t r = 0; r < runs; ++r) {
        if (!random && r > 0) {
            res.run_acc.push_back(res.run_acc.front());
            continue;
        }
        EffectiveKernels perturbed_kernels;
        const EffectiveKernels* ek = &nominal;
        if (err.residue_rmse > 0.0) {
            RngStream rr(seed, RngStream::stream_id_for({kResidue, r}));
            const KernelSet perturbed = errmodel::apply_residue_error(err.kernel_set, err.residue_rmse, rr);
            res.residue_achieved.push_back(errmodel::kernel_set_rmse(perturbed, err.kernel_set));
            perturbed_kernels = discretize(m, err.kernel_set, &perturbed);
            ek = &perturbed_kernels;
        }
        std::size_t correct = 0;
        for (std::size_t start = 0, bi = 0; start < ds.size(); start += kEvalBatch, ++bi) {
            std::vector<std::size_t> idx(std::min(kEvalBatch, ds.size() - start));
            std::iota(idx.begin(), idx.end(), start);
            const data::Batch batch = data::gather(ds, idx);
            RngStream noise(seed, RngStream::stream_id_for({kEvalNoise, r, bi}));
            const ForwardResult fr =
                forward(m, batch.images, *ek, err, {layers::Mode::infer, err.eval_sigma, false}, noise);
            const auto pred = predict(fr.probs);
            for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
        }
        res.run_acc.push_back(static_cast<double>(correct) / static_cast<double>(ds.size()));
    }
    const MeanStd ms = mean_std(res.run_acc);
    res.mean_acc = ms.mean;
    res.std_acc = ms.std;
    return res;
}

}  // namespace mixsig::model
