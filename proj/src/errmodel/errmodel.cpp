#include "mixsig/errmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mixsig/stats.hpp"

namespace mixsig::errmodel {

FixedPointFormat::FixedPointFormat(int total, int integer) : total_bits(total), integer_bits(integer) {
    // L = 1 leaves no representable magnitude (bound 2^m - 2^(m+1-L) = 0)
    if (total_bits < 2) throw std::invalid_argument("fixed-point total bit width must be at least 2");
    if (integer_bits < 0 || integer_bits >= total_bits) {
        throw std::invalid_argument("fixed-point integer bits must satisfy 0 <= m < L");
    }
}

double FixedPointFormat::step() const {
    return std::ldexp(1.0, integer_bits + 1 - total_bits);
}

double FixedPointFormat::bound() const {
    return std::ldexp(1.0, integer_bits) - step();
}

ClipRange::ClipRange(double lo, double hi) : theta1(lo), theta2(hi) {
    if (!(lo < hi)) throw std::invalid_argument("clip range requires theta1 < theta2");
}

DiscreteSet::DiscreteSet(std::vector<Tensor> members) : members_(std::move(members)) {
    if (members_.empty()) throw std::invalid_argument("discrete set must be non-empty");
    for (const auto& m : members_) {
        if (m.shape() != members_.front().shape()) {
            throw std::invalid_argument("discrete set members must share one shape");
        }
    }
}

DiscreteSet DiscreteSet::scalars(std::vector<double> values) {
    std::vector<Tensor> members;
    members.reserve(values.size());
    for (double v : values) members.push_back(Tensor({1}, v));
    return DiscreteSet(std::move(members));
}

DiscreteSet DiscreteSet::from_kernel_set(const KernelSet& set) {
    std::vector<Tensor> members;
    members.reserve(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) members.push_back(set.effective_tensor(k));
    return DiscreteSet(std::move(members));
}

const Shape& DiscreteSet::member_shape() const {
    if (members_.empty()) throw std::invalid_argument("discrete set is empty");
    return members_.front().shape();
}

bool DiscreteSet::is_scalar() const {
    return !members_.empty() && members_.front().size() == 1;
}

ContinuousResponse ContinuousResponse::identity() {
    return {"identity", [](double x) { return x; }, [](double) { return 1.0; }};
}

ContinuousResponse ContinuousResponse::gamma_curve(double gamma) {
    return {"gamma", [gamma](double x) { return x < 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::pow(x, gamma); },
            [gamma](double x) {
                return x < 0.0 ? std::numeric_limits<double>::quiet_NaN() : gamma * std::pow(x, gamma - 1.0);
            }};
}

ContinuousResponse ContinuousResponse::sinusoidal_intensity() {
    constexpr double half_pi = std::numbers::pi / 2.0;
    return {"sin2",
            [](double x) {
                const double s = std::sin(half_pi * x);
                return s * s;
            },
            // d/dx sin^2(pi x / 2) = (pi / 2) sin(pi x)
            [](double x) { return half_pi * std::sin(std::numbers::pi * x); }};
}

double quantize_fixed(double x, const FixedPointFormat& fmt) {
    const double step = fmt.step();
    const double bound = fmt.bound();
    if (std::abs(x) >= bound) return std::copysign(bound, x) + 0.0;
    return std::round(x / step) * step + 0.0;
}

Tensor quantize_fixed(const Tensor& x, const FixedPointFormat& fmt) {
    Tensor out = x;
    for (auto& v : out.values()) v = quantize_fixed(v, fmt);
    return out;
}

StochasticQuantizer::StochasticQuantizer(int n_levels, double range_lo, double range_hi)
    : levels(n_levels), lo(range_lo), hi(range_hi) {
    if (!(lo < hi)) throw std::invalid_argument("stochastic quantizer requires lo < hi");
    if (levels < 2) throw std::invalid_argument("stochastic quantizer requires at least 2 levels");
}

double StochasticQuantizer::apply(double x, RngStream& rng) const noexcept {
    const double clipped = std::clamp(x, lo, hi);
    double t = (clipped - lo) / spacing();
    // snap values that sit on a grid point up to rounding error
    const double nearest = std::round(t);
    if (std::abs(t - nearest) < 1e-12) t = nearest;
    int k = static_cast<int>(std::floor(t));
    if (k >= levels - 1) return grid(levels - 1);
    const double frac = t - k;
    if (frac > 0.0 && rng.uniform() < frac) ++k;
    return grid(k);
}

Tensor stochastic_quantize(const Tensor& x, int levels, double lo, double hi, RngStream& rng) {
    const StochasticQuantizer q(levels, lo, hi);
    Tensor out = x;
    for (auto& v : out.values()) v = q.apply(v, rng);
    return out;
}

Tensor distort_continuous(const Tensor& x, const ContinuousResponse& response) {
    Tensor out = x;
    auto vals = out.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double y = response.f(vals[i]);
        if (!std::isfinite(y)) {
            throw std::domain_error("distort_continuous: response '" + response.name + "' undefined at element " +
                                    std::to_string(i));
        }
        vals[i] = y;
    }
    return out;
}

DiscreteResult distort_discrete(const Tensor& x, const DiscreteSet& set) {
    if (set.empty()) throw std::invalid_argument("distort_discrete: empty discrete set");
    const auto& members = set.members();
    if (set.is_scalar() && x.size() != 1) {
        Tensor out = x;
        for (auto& v : out.values()) {
            double best = members.front()[0];
            double best_dist = std::abs(best - v);
            for (std::size_t k = 1; k < members.size(); ++k) {
                const double d = std::abs(members[k][0] - v);
                if (d < best_dist) {
                    best_dist = d;
                    best = members[k][0];
                }
            }
            v = best;
        }
        return {std::move(out), 0};
    }
    if (x.size() != members.front().size()) {
        throw std::invalid_argument("distort_discrete: input shape " + shape_to_string(x.shape()) +
                                    " incompatible with set member shape " + shape_to_string(set.member_shape()));
    }
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < members.size(); ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) d += std::abs(members[k][i] - x[i]);
        if (d < best_dist) {
            best_dist = d;
            best = k;
        }
    }
    return {members[best].reshaped(x.shape()), best};
}

Tensor add_noise(const Tensor& x, double sigma, RngStream& rng) {
    Tensor noise = gaussian_sample(rng, sigma, x.shape());
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += noise[i];
    return out;
}

Tensor grad_noise(const Tensor& dl_dxtilde) {
    return dl_dxtilde;
}

Tensor grad_continuous(const Tensor& dl_dxtilde, const Tensor& x, const std::function<double(double)>& fprime) {
    require_same_shape(dl_dxtilde, x, "grad_continuous");
    Tensor out = dl_dxtilde;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= fprime(x[i]);
    return out;
}

Tensor grad_clipped_ste(const Tensor& dl_dxtilde, const Tensor& x, const ClipRange& range) {
    require_same_shape(dl_dxtilde, x, "grad_clipped_ste");
    Tensor out = dl_dxtilde;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!range.contains(x[i])) out[i] = 0.0;
    }
    return out;
}

KernelSet apply_residue_error(const KernelSet& set, double target_rmse, RngStream& rng) {
    if (!(target_rmse >= 0.0)) throw std::invalid_argument("apply_residue_error: target rmse must be >= 0");
    KernelSet out = set;
    out.info["residue_rmse"] = std::to_string(target_rmse);
    if (target_rmse == 0.0 || set.entries.empty()) return out;

    std::vector<double> delta(set.size() * kKernelTaps);
    for (auto& d : delta) d = rng.normal();
    const std::vector<double> zeros(delta.size(), 0.0);
    const double scale = target_rmse / rmse(delta, zeros);
    for (std::size_t k = 0; k < out.size(); ++k) {
        for (std::size_t t = 0; t < kKernelTaps; ++t) out.entries[k].effective[t] += scale * delta[k * kKernelTaps + t];
    }
    out.info["residue_seed"] = std::to_string(rng.seed());
    out.info["residue_stream"] = std::to_string(rng.stream_id());
    return out;
}

double kernel_set_rmse(const KernelSet& perturbed, const KernelSet& original) {
    if (perturbed.size() != original.size()) throw std::invalid_argument("kernel_set_rmse: size mismatch");
    std::vector<double> a, b;
    a.reserve(perturbed.size() * kKernelTaps);
    b.reserve(a.capacity());
    for (std::size_t k = 0; k < perturbed.size(); ++k) {
        a.insert(a.end(), perturbed.entries[k].effective.begin(), perturbed.entries[k].effective.end());
        b.insert(b.end(), original.entries[k].effective.begin(), original.entries[k].effective.end());
    }
    return rmse(a, b);
}

}  // namespace mixsig::errmodel
