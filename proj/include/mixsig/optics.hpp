#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixsig/kernel_set.hpp"

namespace mixsig::optics {

/// All 511 non-zero 3x3 binary patterns, ascending by 9-bit encoding.
std::vector<Kernel3x3> enumerate_binary_kernels();

inline constexpr std::size_t kMinPad = 8;
inline constexpr std::size_t kDefaultPad = 256;

struct PhaseOnlyKernel {
    Kernel3x3 effective{};
    /// Fraction of the filtered field's energy that falls outside the central 3x3.
    double truncation_energy = 0.0;
    /// Largest |imag| after the inverse transform.
    double max_imag = 0.0;
};

/// Kernel realized when the pattern's Fourier filter is replaced by its phase
/// alone on a pad x pad grid, cropped to 3x3 and rescaled to the pattern's L1
/// mass. Zero-magnitude coefficients get phase factor 1.
PhaseOnlyKernel phase_only_effective_kernel(const Kernel3x3& pattern, std::size_t pad);

enum class KernelMode { phase, identity };

KernelMode parse_kernel_mode(const std::string& text);
std::string to_string(KernelMode mode);

struct KernelSetOptions {
    KernelMode mode = KernelMode::phase;
    std::size_t pad = kDefaultPad;
    /// Build fails if any kernel leaks more than this fraction of its energy
    /// outside the 3x3 support. 1.0 disables the check.
    double max_truncation_energy = 1.0;
};

/// Thrown when a pattern's truncation energy exceeds the configured limit.
struct TruncationError : std::runtime_error {
    TruncationError(const std::string& what, double energy) : std::runtime_error(what), residual_energy(energy) {}
    double residual_energy;
};

KernelSet build_kernel_set(const KernelSetOptions& options = {});

// Calibration -------------------------------------------------------------------

/// Maps an ideal pattern to the kernel the device actually realizes.
using EffectiveKernelFn = std::function<Kernel3x3(const Kernel3x3& pattern)>;

/// Pushes a single-pixel input through the convolution pipeline with the
/// given kernel and reads the 3x3 response back in kernel coordinates.
Kernel3x3 delta_response(const Kernel3x3& realized);

/// Delta-input measurement of the kernel realized for `pattern`. Throws
/// std::logic_error if the measurement deviates from device(pattern) by more
/// than 1e-9.
Kernel3x3 calibrate(const EffectiveKernelFn& device, const Kernel3x3& pattern);

/// Device model backed by a stored kernel set.
EffectiveKernelFn device_from_set(const KernelSet& set);

struct DistortionSummary {
    double mean_rmse = 0.0;
    double max_rmse = 0.0;
    double max_truncation_energy = 0.0;
};

/// RMSE of each effective kernel against its binary pattern.
DistortionSummary summarize_distortion(const KernelSet& set);

// Kernel-set file ------------------------------------------------------------------

void write_kernel_set(const std::filesystem::path& path, const KernelSet& set);
KernelSet read_kernel_set(const std::filesystem::path& path);
std::string format_kernel_set(const KernelSet& set);
KernelSet parse_kernel_set(const std::string& text);

}  // namespace mixsig::optics
