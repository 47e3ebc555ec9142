#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mixsig/kernel_set.hpp"
#include "mixsig/rng.hpp"
#include "mixsig/tensor.hpp"

namespace mixsig::errmodel {

/// Signed fixed-point format with L total bits, m of them integer bits.
/// Step is 2^(m+1-L); the largest magnitude is 2^m - step.
struct FixedPointFormat {
    int total_bits = 8;
    int integer_bits = 0;

    FixedPointFormat(int total, int integer);

    double step() const;
    double bound() const;
};

/// Open interval (theta1, theta2) for the clipped straight-through estimator.
struct ClipRange {
    double theta1;
    double theta2;

    ClipRange(double lo, double hi);
    bool contains(double x) const noexcept { return theta1 < x && x < theta2; }
};

/// Finite set X' of same-shaped tensors, compared under L1 distance.
class DiscreteSet {
public:
    DiscreteSet() = default;
    explicit DiscreteSet(std::vector<Tensor> members);

    /// Scalar members, e.g. {0, 1}.
    static DiscreteSet scalars(std::vector<double> values);
    static DiscreteSet from_kernel_set(const KernelSet& set);

    const std::vector<Tensor>& members() const noexcept { return members_; }
    std::size_t size() const noexcept { return members_.size(); }
    bool empty() const noexcept { return members_.empty(); }
    const Shape& member_shape() const;
    bool is_scalar() const;

private:
    std::vector<Tensor> members_;
};

struct DiscreteResult {
    Tensor value;
    std::size_t index = 0;
};

/// Smooth device response f with its derivative f'.
struct ContinuousResponse {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> fprime;

    static ContinuousResponse identity();
    /// Detector gamma curve x^gamma (undefined for negative x).
    static ContinuousResponse gamma_curve(double gamma);
    /// Interferometric intensity sin^2(pi x / 2).
    static ContinuousResponse sinusoidal_intensity();
};

// Forward corruption ----------------------------------------------------------

/// Round to the nearest multiple of the format step (ties away from zero),
/// clipping |x| >= bound to sign(x) * bound.
Tensor quantize_fixed(const Tensor& x, const FixedPointFormat& fmt);
double quantize_fixed(double x, const FixedPointFormat& fmt);

/// Unbiased stochastic rounding onto `levels` evenly spaced points of [lo, hi].
struct StochasticQuantizer {
    int levels;
    double lo;
    double hi;

    StochasticQuantizer(int levels, double lo, double hi);
    double spacing() const noexcept { return (hi - lo) / (levels - 1); }
    double grid(int k) const noexcept { return lo + k * spacing(); }
    double apply(double x, RngStream& rng) const noexcept;
};

Tensor stochastic_quantize(const Tensor& x, int levels, double lo, double hi, RngStream& rng);

/// Elementwise f(x). Throws std::domain_error naming the first element where
/// f is undefined (non-finite result).
Tensor distort_continuous(const Tensor& x, const ContinuousResponse& response);

/// Member of the set nearest to x in L1, with its index. Scalar sets are
/// applied elementwise (index is then 0). Ties resolve to the lowest index.
DiscreteResult distort_discrete(const Tensor& x, const DiscreteSet& set);

/// x + N(0, sigma^2) noise of matching shape.
Tensor add_noise(const Tensor& x, double sigma, RngStream& rng);

// Backward rules --------------------------------------------------------------

/// Noise nodes pass gradient straight through.
Tensor grad_noise(const Tensor& dl_dxtilde);

/// dl/dx = dl/dx~ * f'(x).
Tensor grad_continuous(const Tensor& dl_dxtilde, const Tensor& x, const std::function<double(double)>& fprime);

/// dl/dx = dl/dx~ where theta1 < x < theta2, else 0.
Tensor grad_clipped_ste(const Tensor& dl_dxtilde, const Tensor& x, const ClipRange& range);

// Residue (uncorrected) deterministic error -----------------------------------

/// Copy of `set` whose effective kernels carry one fixed Gaussian perturbation,
/// rescaled so the RMSE over all taps equals `target_rmse` exactly.
KernelSet apply_residue_error(const KernelSet& set, double target_rmse, RngStream& rng);

/// RMSE between the effective kernels of two sets with matching layout.
double kernel_set_rmse(const KernelSet& perturbed, const KernelSet& original);

}  // namespace mixsig::errmodel
