#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixsig/rng.hpp"
#include "mixsig/tensor.hpp"

namespace mixsig::data {

/// Unparsed contents of an IDX image/label file pair.
struct RawIdx {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
    std::vector<std::uint8_t> digits;  // count
    std::uint32_t images_crc32 = 0;
    std::uint32_t labels_crc32 = 0;
    std::string images_source;
    std::string labels_source;
};

class IdxError : public std::runtime_error {
public:
    enum class Kind { io, bad_magic, truncated, count_mismatch, bad_dimensions };
    IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

inline constexpr std::uint32_t kImageMagic = 0x00000803;
inline constexpr std::uint32_t kLabelMagic = 0x00000801;

/// Reads an IDX pair (plain or gzip-compressed). Throws IdxError.
RawIdx parse_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Encodes a pair of IDX byte streams (uncompressed), for tests and tooling.
std::string encode_idx_images(const RawIdx& raw);
std::string encode_idx_labels(const RawIdx& raw);

// Class map ---------------------------------------------------------------------

inline constexpr std::size_t kNumClasses = 9;
inline constexpr int kExcludedDigit = 6;
/// Retained digits in ascending order; position k is class id k.
inline constexpr std::array<int, kNumClasses> kClassDigits = {0, 1, 2, 3, 4, 5, 7, 8, 9};

std::optional<std::uint8_t> class_for_digit(int digit) noexcept;
int digit_for_class(std::uint8_t class_id);

// Dataset -----------------------------------------------------------------------

enum class Split { train, test };
std::string to_string(Split split);

struct Provenance {
    std::string images_source;
    std::string labels_source;
    std::uint32_t images_crc32 = 0;
    std::uint32_t labels_crc32 = 0;
    double threshold = 0.5;
    std::size_t dropped = 0;  // samples of the excluded digit
};

struct Dataset {
    Tensor images;                      // [N, 28, 28] in {0, 1}
    std::vector<std::uint8_t> labels;   // class ids 0..8
    Split split = Split::train;
    Provenance provenance;

    std::size_t size() const noexcept { return labels.size(); }
};

inline constexpr double kDefaultThreshold = 0.5;

/// Drops the excluded digit, maps digits to class ids and binarizes
/// intensity / 255 > threshold. Throws std::invalid_argument unless
/// 0 < threshold < 1.
Dataset prepare(const RawIdx& raw, double threshold = kDefaultThreshold, Split split = Split::train);

/// Binary images back to 0/255 bytes with digit labels, so prepare(to_raw(d))
/// reproduces d.
RawIdx to_raw(const Dataset& ds);

/// First `n` samples (all of them if n >= size()).
Dataset head(const Dataset& ds, std::size_t n);

/// Standard MNIST file names under `dir`, trying `.gz` before the bare name.
/// An empty `dir` falls back to $MIXSIG_MNIST_DIR.
Dataset load_mnist(const std::filesystem::path& dir, Split split, double threshold = kDefaultThreshold);

/// Directory from the argument, else $MIXSIG_MNIST_DIR. Throws
/// std::invalid_argument when neither is set.
std::filesystem::path resolve_data_dir(const std::filesystem::path& dir);

// Batching ----------------------------------------------------------------------

struct Batch {
    Tensor images;  // [B, 28, 28]
    std::vector<std::uint8_t> labels;
    std::vector<std::size_t> indices;  // positions in the source dataset
};

Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices);

/// One pass over a dataset in fixed-size batches; the last batch may be short.
/// With shuffle on, the order is a Fisher-Yates permutation drawn from `rng`.
class BatchIterator {
public:
    BatchIterator(const Dataset& ds, std::size_t batch_size, RngStream& rng, bool shuffle);

    /// Fills `out` with the next batch; false once the pass is complete.
    bool next(Batch& out);
    std::size_t batch_count() const noexcept;
    const std::vector<std::size_t>& order() const noexcept { return order_; }

private:
    const Dataset* ds_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

}  // namespace mixsig::data
