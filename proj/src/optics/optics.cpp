#include "mixsig/optics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <sstream>

#include "mixsig/io.hpp"
#include "mixsig/layers.hpp"
#include "mixsig/stats.hpp"

namespace mixsig::optics {

namespace {

// One forward and one inverse in-place 2-D plan over a P x P buffer.
class FourierPlan {
public:
    explicit FourierPlan(std::size_t pad) : pad_(pad) {
        const int n = static_cast<int>(pad);
        buffer_ = fftw_alloc_complex(pad * pad);
        if (!buffer_) throw std::bad_alloc();
        forward_ = fftw_plan_dft_2d(n, n, buffer_, buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_2d(n, n, buffer_, buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!forward_ || !inverse_) {
            release();
            throw std::runtime_error("fftw planning failed for pad " + std::to_string(pad));
        }
    }
    FourierPlan(const FourierPlan&) = delete;
    FourierPlan& operator=(const FourierPlan&) = delete;
    ~FourierPlan() { release(); }

    std::complex<double>* data() noexcept { return reinterpret_cast<std::complex<double>*>(buffer_); }
    void forward() noexcept { fftw_execute(forward_); }
    void inverse() noexcept { fftw_execute(inverse_); }
    std::size_t pad() const noexcept { return pad_; }

private:
    void release() noexcept {
        if (forward_) fftw_destroy_plan(forward_);
        if (inverse_) fftw_destroy_plan(inverse_);
        if (buffer_) fftw_free(buffer_);
        forward_ = inverse_ = nullptr;
        buffer_ = nullptr;
    }

    std::size_t pad_;
    fftw_complex* buffer_ = nullptr;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

PhaseOnlyKernel phase_only_with(FourierPlan& plan, const Kernel3x3& pattern) {
    const std::size_t P = plan.pad();
    const std::size_t centre = P / 2;
    auto* field = plan.data();
    std::fill(field, field + P * P, std::complex<double>(0.0, 0.0));
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) field[(centre - 1 + r) * P + (centre - 1 + c)] = pattern[r * 3 + c];
    }
    plan.forward();

    double max_mag = 0.0;
    for (std::size_t k = 0; k < P * P; ++k) max_mag = std::max(max_mag, std::abs(field[k]));
    const double zero_tol = 1e-12 * std::max(max_mag, 1.0);
    for (std::size_t k = 0; k < P * P; ++k) {
        const double mag = std::abs(field[k]);
        field[k] = mag <= zero_tol ? std::complex<double>(1.0, 0.0) : field[k] / mag;
    }
    plan.inverse();

    PhaseOnlyKernel out;
    const double norm = 1.0 / static_cast<double>(P * P);
    double total_energy = 0.0;
    for (std::size_t k = 0; k < P * P; ++k) {
        const double re = field[k].real() * norm;
        total_energy += re * re;
        out.max_imag = std::max(out.max_imag, std::abs(field[k].imag() * norm));
    }
    double crop_energy = 0.0;
    double crop_l1 = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            const double re = field[(centre - 1 + r) * P + (centre - 1 + c)].real() * norm;
            out.effective[r * 3 + c] = re;
            crop_energy += re * re;
            crop_l1 += std::abs(re);
        }
    }
    out.truncation_energy = total_energy > 0.0 ? 1.0 - crop_energy / total_energy : 0.0;

    double mass = 0.0;
    for (double v : pattern) mass += v;
    if (crop_l1 > 0.0) {
        for (auto& v : out.effective) v *= mass / crop_l1;
    }
    return out;
}

}  // namespace

std::vector<Kernel3x3> enumerate_binary_kernels() {
    std::vector<Kernel3x3> out;
    out.reserve(511);
    for (std::uint16_t e = 1; e < 512; ++e) out.push_back(pattern_from_encoding(e));
    return out;
}

PhaseOnlyKernel phase_only_effective_kernel(const Kernel3x3& pattern, std::size_t pad) {
    if (pad < kMinPad) throw std::invalid_argument("phase-only kernel: pad must be >= " + std::to_string(kMinPad));
    FourierPlan plan(pad);
    return phase_only_with(plan, pattern);
}

KernelMode parse_kernel_mode(const std::string& text) {
    if (text == "phase") return KernelMode::phase;
    if (text == "identity") return KernelMode::identity;
    throw std::invalid_argument("unknown kernel mode '" + text + "' (expected phase or identity)");
}

std::string to_string(KernelMode mode) {
    return mode == KernelMode::phase ? "phase" : "identity";
}

KernelSet build_kernel_set(const KernelSetOptions& options) {
    KernelSet set;
    set.info["mode"] = to_string(options.mode);
    set.info["normalization"] = "l1-mass";
    set.info["zero_phase"] = "1";
    const auto patterns = enumerate_binary_kernels();
    set.entries.reserve(patterns.size());

    if (options.mode == KernelMode::identity) {
        for (const auto& p : patterns) set.entries.push_back({encoding_from_pattern(p), p, p});
        return set;
    }
    if (options.pad < kMinPad) {
        throw std::invalid_argument("kernel set: pad must be >= " + std::to_string(kMinPad));
    }
    set.info["pad"] = std::to_string(options.pad);
    FourierPlan plan(options.pad);
    double worst_energy = 0.0;
    double worst_imag = 0.0;
    for (const auto& p : patterns) {
        const PhaseOnlyKernel k = phase_only_with(plan, p);
        if (k.truncation_energy > options.max_truncation_energy) {
            throw TruncationError("kernel set: pattern " + std::to_string(encoding_from_pattern(p)) +
                                      " leaves residual energy " + std::to_string(k.truncation_energy) +
                                      " outside the 3x3 support at pad " + std::to_string(options.pad),
                                  k.truncation_energy);
        }
        worst_energy = std::max(worst_energy, k.truncation_energy);
        worst_imag = std::max(worst_imag, k.max_imag);
        set.entries.push_back({encoding_from_pattern(p), p, k.effective});
    }
    if (worst_imag > 1e-9) {
        throw std::logic_error("kernel set: imaginary residue " + std::to_string(worst_imag) + " after inverse transform");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", worst_energy);
    set.info["max_truncation_energy"] = buf;
    return set;
}

Kernel3x3 delta_response(const Kernel3x3& realized) {
    Tensor input({3, 3, 1}, 0.0);
    input.at(1, 1, 0) = 1.0;
    Tensor kernel({3, 3, 1, 1}, std::vector<double>(realized.begin(), realized.end()));
    RngStream unused(0, 0);
    const auto act = layers::conv3x3_noisy(input, kernel, 0.0, unused);
    // The layer correlates, so the response at (i, j) is W[2 - i, 2 - j].
    Kernel3x3 out{};
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) out[(2 - i) * 3 + (2 - j)] = act.h.at(i, j, 0, 0);
    }
    return out;
}

Kernel3x3 calibrate(const EffectiveKernelFn& device, const Kernel3x3& pattern) {
    const Kernel3x3 expected = device(pattern);
    const Kernel3x3 measured = delta_response(expected);
    for (std::size_t t = 0; t < kKernelTaps; ++t) {
        if (std::abs(measured[t] - expected[t]) > 1e-9) {
            throw std::logic_error("calibration mismatch for pattern " + std::to_string(encoding_from_pattern(pattern)) +
                                   " at tap " + std::to_string(t));
        }
    }
    return measured;
}

EffectiveKernelFn device_from_set(const KernelSet& set) {
    return [&set](const Kernel3x3& pattern) -> Kernel3x3 {
        const std::uint16_t e = encoding_from_pattern(pattern);
        for (const auto& entry : set.entries) {
            if (entry.encoding == e) return entry.effective;
        }
        throw std::invalid_argument("pattern " + std::to_string(e) + " is not in the kernel set");
    };
}

DistortionSummary summarize_distortion(const KernelSet& set) {
    DistortionSummary s;
    if (set.entries.empty()) return s;
    double total = 0.0;
    for (const auto& e : set.entries) {
        const double r = rmse(e.effective, e.pattern);
        total += r;
        s.max_rmse = std::max(s.max_rmse, r);
    }
    s.mean_rmse = total / static_cast<double>(set.size());
    if (auto it = set.info.find("max_truncation_energy"); it != set.info.end()) {
        s.max_truncation_energy = std::stod(it->second);
    }
    return s;
}

// File format ---------------------------------------------------------------------

namespace {
constexpr const char* kKernelSetMagic = "# mixsig-kernel-set v1";
}

std::string format_kernel_set(const KernelSet& set) {
    std::ostringstream os;
    os << kKernelSetMagic << '\n';
    for (const auto& [k, v] : set.info) os << "# " << k << '=' << v << '\n';
    os << "# entries=" << set.size() << '\n';
    os << "# columns: encoding k00 k01 k02 k10 k11 k12 k20 k21 k22\n";
    char buf[32];
    for (const auto& e : set.entries) {
        os << e.encoding;
        for (double v : e.effective) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ' ' << buf;
        }
        os << '\n';
    }
    return os.str();
}

KernelSet parse_kernel_set(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kKernelSetMagic) {
        throw std::runtime_error("kernel-set file: missing header '" + std::string(kKernelSetMagic) + "'");
    }
    KernelSet set;
    std::size_t declared = 0;
    bool have_count = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (line.rfind("# columns:", 0) == 0 || eq == std::string::npos) continue;
            const std::string key = line.substr(2, eq - 2);
            const std::string value = line.substr(eq + 1);
            if (key == "entries") {
                declared = std::stoul(value);
                have_count = true;
            } else {
                set.info[key] = value;
            }
            continue;
        }
        std::istringstream row(line);
        unsigned encoding = 0;
        if (!(row >> encoding) || encoding == 0 || encoding >= 512) {
            throw std::runtime_error("kernel-set file: bad encoding on line " + std::to_string(line_no));
        }
        KernelEntry entry;
        entry.encoding = static_cast<std::uint16_t>(encoding);
        entry.pattern = pattern_from_encoding(entry.encoding);
        for (auto& v : entry.effective) {
            std::string tok;
            if (!(row >> tok)) throw std::runtime_error("kernel-set file: short record on line " + std::to_string(line_no));
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v)) {
                throw std::runtime_error("kernel-set file: bad value '" + tok + "' on line " + std::to_string(line_no));
            }
        }
        set.entries.push_back(entry);
    }
    if (!have_count || declared != set.size()) {
        throw std::runtime_error("kernel-set file: entry count " + std::to_string(set.size()) +
                                 " does not match header");
    }
    return set;
}

void write_kernel_set(const std::filesystem::path& path, const KernelSet& set) {
    write_file_atomic(path, format_kernel_set(set));
}

KernelSet read_kernel_set(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return parse_kernel_set(text);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace mixsig::optics
