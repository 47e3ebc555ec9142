#include "mixsig/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <memory>

namespace mixsig::data {

namespace {

std::string read_maybe_gzip(const std::filesystem::path& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IdxError(IdxError::Kind::io, "cannot open " + path.string());
    std::unique_ptr<gzFile_s, int (*)(gzFile)> guard(f, gzclose);
    std::string out;
    char buf[1 << 16];
    for (;;) {
        const int n = gzread(f, buf, sizeof buf);
        if (n < 0) {
            int err = 0;
            const char* msg = gzerror(f, &err);
            throw IdxError(IdxError::Kind::truncated, path.string() + ": " + (msg ? msg : "read error"));
        }
        if (n == 0) break;
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

std::uint32_t be32(const std::string& bytes, std::size_t offset) {
    const auto b = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])); };
    return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

void put_be32(std::string& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::uint32_t crc_of(const std::string& bytes) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void require_header(const std::string& bytes, std::size_t need, const std::filesystem::path& path) {
    if (bytes.size() < need) {
        throw IdxError(IdxError::Kind::truncated, path.string() + ": header needs " + std::to_string(need) +
                                                      " bytes, file has " + std::to_string(bytes.size()));
    }
}

}  // namespace

RawIdx parse_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const std::string img = read_maybe_gzip(images_path);
    const std::string lab = read_maybe_gzip(labels_path);

    require_header(img, 4, images_path);
    if (const auto magic = be32(img, 0); magic != kImageMagic) {
        throw IdxError(IdxError::Kind::bad_magic, images_path.string() + ": magic " + std::to_string(magic) +
                                                      ", expected " + std::to_string(kImageMagic));
    }
    require_header(img, 16, images_path);
    require_header(lab, 4, labels_path);
    if (const auto magic = be32(lab, 0); magic != kLabelMagic) {
        throw IdxError(IdxError::Kind::bad_magic, labels_path.string() + ": magic " + std::to_string(magic) +
                                                      ", expected " + std::to_string(kLabelMagic));
    }
    require_header(lab, 8, labels_path);

    RawIdx raw;
    raw.count = be32(img, 4);
    raw.rows = be32(img, 8);
    raw.cols = be32(img, 12);
    if (raw.rows == 0 || raw.cols == 0) {
        throw IdxError(IdxError::Kind::bad_dimensions, images_path.string() + ": zero image dimension");
    }
    const std::size_t label_count = be32(lab, 4);
    if (label_count != raw.count) {
        throw IdxError(IdxError::Kind::count_mismatch, "image count " + std::to_string(raw.count) + " in " +
                                                           images_path.string() + " vs label count " +
                                                           std::to_string(label_count) + " in " + labels_path.string());
    }
    const std::size_t pixel_bytes = raw.count * raw.rows * raw.cols;
    if (img.size() - 16 < pixel_bytes) {
        throw IdxError(IdxError::Kind::truncated, images_path.string() + ": payload has " +
                                                      std::to_string(img.size() - 16) + " bytes, header declares " +
                                                      std::to_string(pixel_bytes));
    }
    if (lab.size() - 8 < raw.count) {
        throw IdxError(IdxError::Kind::truncated, labels_path.string() + ": payload has " +
                                                      std::to_string(lab.size() - 8) + " bytes, header declares " +
                                                      std::to_string(raw.count));
    }
    raw.pixels.assign(img.begin() + 16, img.begin() + 16 + static_cast<std::ptrdiff_t>(pixel_bytes));
    raw.digits.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(raw.count));
    raw.images_crc32 = crc_of(img);
    raw.labels_crc32 = crc_of(lab);
    raw.images_source = images_path.string();
    raw.labels_source = labels_path.string();
    return raw;
}

std::string encode_idx_images(const RawIdx& raw) {
    std::string out;
    put_be32(out, kImageMagic);
    put_be32(out, static_cast<std::uint32_t>(raw.count));
    put_be32(out, static_cast<std::uint32_t>(raw.rows));
    put_be32(out, static_cast<std::uint32_t>(raw.cols));
    out.append(raw.pixels.begin(), raw.pixels.end());
    return out;
}

std::string encode_idx_labels(const RawIdx& raw) {
    std::string out;
    put_be32(out, kLabelMagic);
    put_be32(out, static_cast<std::uint32_t>(raw.count));
    out.append(raw.digits.begin(), raw.digits.end());
    return out;
}

std::optional<std::uint8_t> class_for_digit(int digit) noexcept {
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        if (kClassDigits[k] == digit) return static_cast<std::uint8_t>(k);
    }
    return std::nullopt;
}

int digit_for_class(std::uint8_t class_id) {
    if (class_id >= kNumClasses) throw std::out_of_range("class id " + std::to_string(class_id) + " out of range");
    return kClassDigits[class_id];
}

std::string to_string(Split split) {
    return split == Split::train ? "train" : "test";
}

Dataset prepare(const RawIdx& raw, double threshold, Split split) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("prepare: threshold must lie in (0, 1), got " + std::to_string(threshold));
    }
    if (raw.pixels.size() != raw.count * raw.rows * raw.cols || raw.digits.size() != raw.count) {
        throw std::invalid_argument("prepare: raw payload sizes disagree with the header");
    }
    const std::size_t pix = raw.rows * raw.cols;
    std::vector<std::size_t> keep;
    keep.reserve(raw.count);
    for (std::size_t i = 0; i < raw.count; ++i) {
        if (class_for_digit(raw.digits[i])) keep.push_back(i);
    }

    Dataset ds;
    ds.split = split;
    ds.provenance = {raw.images_source, raw.labels_source, raw.images_crc32, raw.labels_crc32, threshold,
                     raw.count - keep.size()};
    if (keep.empty()) return ds;
    std::vector<double> values(keep.size() * pix);
    ds.labels.reserve(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const std::uint8_t* src = raw.pixels.data() + keep[k] * pix;
        for (std::size_t p = 0; p < pix; ++p) values[k * pix + p] = src[p] / 255.0 > threshold ? 1.0 : 0.0;
        ds.labels.push_back(*class_for_digit(raw.digits[keep[k]]));
    }
    ds.images = Tensor({keep.size(), raw.rows, raw.cols}, std::move(values));
    return ds;
}

RawIdx to_raw(const Dataset& ds) {
    RawIdx raw;
    raw.count = ds.size();
    if (raw.count == 0) return raw;
    raw.rows = ds.images.extent(1);
    raw.cols = ds.images.extent(2);
    raw.pixels.reserve(ds.images.size());
    for (double v : ds.images.values()) raw.pixels.push_back(v > 0.0 ? 255 : 0);
    for (auto c : ds.labels) raw.digits.push_back(static_cast<std::uint8_t>(digit_for_class(c)));
    raw.images_source = ds.provenance.images_source;
    raw.labels_source = ds.provenance.labels_source;
    raw.images_crc32 = ds.provenance.images_crc32;
    raw.labels_crc32 = ds.provenance.labels_crc32;
    return raw;
}

Dataset head(const Dataset& ds, std::size_t n) {
    if (n >= ds.size()) return ds;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Batch b = gather(ds, idx);
    Dataset out;
    out.images = std::move(b.images);
    out.labels = std::move(b.labels);
    out.split = ds.split;
    out.provenance = ds.provenance;
    return out;
}

std::filesystem::path resolve_data_dir(const std::filesystem::path& dir) {
    if (!dir.empty()) return dir;
    if (const char* env = std::getenv("MIXSIG_MNIST_DIR"); env && *env) return env;
    throw std::invalid_argument("no MNIST directory given and MIXSIG_MNIST_DIR is not set");
}

Dataset load_mnist(const std::filesystem::path& dir, Split split, double threshold) {
    const auto root = resolve_data_dir(dir);
    const std::string prefix = split == Split::train ? "train" : "t10k";
    const auto pick = [&](const std::string& stem) {
        const auto gz = root / (stem + ".gz");
        return std::filesystem::exists(gz) ? gz : root / stem;
    };
    return prepare(parse_idx(pick(prefix + "-images-idx3-ubyte"), pick(prefix + "-labels-idx1-ubyte")), threshold,
                   split);
}

Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("gather: empty index list");
    const std::size_t rows = ds.images.extent(1);
    const std::size_t cols = ds.images.extent(2);
    const std::size_t pix = rows * cols;
    Batch b;
    std::vector<double> values(indices.size() * pix);
    b.labels.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        if (i >= ds.size()) throw std::out_of_range("gather: index " + std::to_string(i) + " out of range");
        std::copy_n(ds.images.data() + i * pix, pix, values.begin() + static_cast<std::ptrdiff_t>(k * pix));
        b.labels.push_back(ds.labels[i]);
    }
    b.images = Tensor({indices.size(), rows, cols}, std::move(values));
    b.indices = indices;
    return b;
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size, RngStream& rng, bool shuffle)
    : ds_(&ds), batch_size_(batch_size), order_(ds.size()) {
    if (batch_size == 0) throw std::invalid_argument("batches: batch size must be >= 1");
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (shuffle) {
        for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
    }
}

bool BatchIterator::next(Batch& out) {
    if (pos_ >= order_.size()) return false;
    const std::size_t end = std::min(pos_ + batch_size_, order_.size());
    out = gather(*ds_, std::vector<std::size_t>(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                                order_.begin() + static_cast<std::ptrdiff_t>(end)));
    pos_ = end;
    return true;
}

std::size_t BatchIterator::batch_count() const noexcept {
    return (order_.size() + batch_size_ - 1) / batch_size_;
}

}  // namespace mixsig::data
