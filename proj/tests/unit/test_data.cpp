#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include <zlib.h>

#include "mixsig/data.hpp"
#include "mixsig/io.hpp"
#include "test_support.hpp"

using namespace mixsig;
using namespace mixsig::data;

namespace {

RawIdx synthetic(std::size_t n) {
    RawIdx raw;
    raw.count = n;
    raw.rows = 28;
    raw.cols = 28;
    raw.pixels.resize(n * 784);
    raw.digits.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        raw.digits[i] = static_cast<std::uint8_t>(i % 10);
        for (std::size_t p = 0; p < 784; ++p) raw.pixels[i * 784 + p] = static_cast<std::uint8_t>((i * 31 + p * 7) % 256);
    }
    return raw;
}

std::string gzip(const std::string& bytes) {
    uLongf len = compressBound(bytes.size()) + 32;
    std::string out(len, '\0');
    z_stream zs{};
    deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
    zs.avail_in = static_cast<uInt>(bytes.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

IdxError::Kind parse_kind(const testkit::TempDir& dir, const std::string& images, const std::string& labels) {
    write_file_atomic(dir / "i.idx", images);
    write_file_atomic(dir / "l.idx", labels);
    try {
        parse_idx(dir / "i.idx", dir / "l.idx");
    } catch (const IdxError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "parse_idx accepted damaged input";
    return IdxError::Kind::io;
}

}  // namespace

TEST(Idx, RoundTripsPlainAndGzip) {
    testkit::TempDir dir("idx");
    const RawIdx raw = synthetic(25);
    write_file_atomic(dir / "i.idx", encode_idx_images(raw));
    write_file_atomic(dir / "l.idx", encode_idx_labels(raw));
    const RawIdx back = parse_idx(dir / "i.idx", dir / "l.idx");
    EXPECT_EQ(back.count, 25u);
    EXPECT_EQ(back.rows, 28u);
    EXPECT_EQ(back.pixels, raw.pixels);
    EXPECT_EQ(back.digits, raw.digits);

    write_file_atomic(dir / "i.idx.gz", gzip(encode_idx_images(raw)));
    write_file_atomic(dir / "l.idx.gz", gzip(encode_idx_labels(raw)));
    const RawIdx gz = parse_idx(dir / "i.idx.gz", dir / "l.idx.gz");
    EXPECT_EQ(gz.pixels, raw.pixels);
    EXPECT_EQ(gz.digits, raw.digits);
    // The checksum is over the decoded stream, so both encodings agree.
    EXPECT_EQ(gz.images_crc32, back.images_crc32);
}

TEST(Idx, HeaderIsBigEndian) {
    const std::string bytes = encode_idx_images(synthetic(3));
    ASSERT_GE(bytes.size(), 16u);
    EXPECT_EQ(bytes.substr(0, 4), std::string("\x00\x00\x08\x03", 4));
    EXPECT_EQ(bytes.substr(4, 4), std::string("\x00\x00\x00\x03", 4));
    EXPECT_EQ(bytes.substr(8, 4), std::string("\x00\x00\x00\x1c", 4));
    EXPECT_EQ(bytes.size(), 16u + 3u * 784u);
    EXPECT_EQ(encode_idx_labels(synthetic(3)).substr(0, 4), std::string("\x00\x00\x08\x01", 4));
}

TEST(Idx, ReportsSpecificErrors) {
    testkit::TempDir dir("idxerr");
    const RawIdx raw = synthetic(4);
    const std::string images = encode_idx_images(raw);
    const std::string labels = encode_idx_labels(raw);

    std::string bad_magic = images;
    bad_magic[3] = 0x02;
    EXPECT_EQ(parse_kind(dir, bad_magic, labels), IdxError::Kind::bad_magic);
    EXPECT_EQ(parse_kind(dir, labels, labels), IdxError::Kind::bad_magic);
    EXPECT_EQ(parse_kind(dir, images.substr(0, images.size() - 1), labels), IdxError::Kind::truncated);
    EXPECT_EQ(parse_kind(dir, images, labels.substr(0, 6)), IdxError::Kind::truncated);
    EXPECT_EQ(parse_kind(dir, images, encode_idx_labels(synthetic(5))), IdxError::Kind::count_mismatch);

    std::string zero_rows = images;
    zero_rows[11] = 0;
    EXPECT_EQ(parse_kind(dir, zero_rows, labels), IdxError::Kind::bad_dimensions);

    try {
        parse_idx(dir / "absent-images", dir / "l.idx");
        FAIL();
    } catch (const IdxError& e) {
        EXPECT_EQ(e.kind(), IdxError::Kind::io);
        EXPECT_NE(std::string(e.what()).find("absent-images"), std::string::npos);
    }
}

TEST(ClassMap, SkipsSixAndIsAscending) {
    EXPECT_FALSE(class_for_digit(6).has_value());
    EXPECT_FALSE(class_for_digit(10).has_value());
    EXPECT_FALSE(class_for_digit(-1).has_value());
    std::uint8_t expect = 0;
    for (int d = 0; d < 10; ++d) {
        if (d == 6) continue;
        ASSERT_EQ(class_for_digit(d), expect);
        EXPECT_EQ(digit_for_class(expect), d);
        ++expect;
    }
    EXPECT_THROW(digit_for_class(9), std::out_of_range);
}

TEST(Prepare, DropsSixBinarizesAndRecordsProvenance) {
    RawIdx raw = synthetic(20);
    raw.pixels[0] = 200;
    raw.pixels[1] = 100;
    raw.pixels[2] = 128;  // 128 / 255 > 0.5
    raw.pixels[3] = 127;
    const Dataset ds = prepare(raw);
    EXPECT_EQ(ds.size(), 18u);
    EXPECT_EQ(ds.provenance.dropped, 2u);
    EXPECT_EQ(ds.provenance.threshold, 0.5);
    EXPECT_EQ(ds.images.shape(), (Shape{18, 28, 28}));
    EXPECT_EQ(ds.images[0], 1.0);
    EXPECT_EQ(ds.images[1], 0.0);
    EXPECT_EQ(ds.images[2], 1.0);
    EXPECT_EQ(ds.images[3], 0.0);
    std::set<std::uint8_t> classes(ds.labels.begin(), ds.labels.end());
    EXPECT_EQ(classes.size(), 9u);
    EXPECT_EQ(*classes.rbegin(), 8);
    for (double v : ds.images.values()) ASSERT_TRUE(v == 0.0 || v == 1.0);

    EXPECT_THROW(prepare(raw, 0.0), std::invalid_argument);
    EXPECT_THROW(prepare(raw, 1.0), std::invalid_argument);
}

TEST(Prepare, AllZeroImageStaysZeroAndThresholdIsMonotone) {
    RawIdx raw = synthetic(10);
    std::fill(raw.pixels.begin(), raw.pixels.begin() + 784, 0);
    const Dataset lo = prepare(raw, 0.3), hi = prepare(raw, 0.7);
    for (std::size_t p = 0; p < 784; ++p) ASSERT_EQ(lo.images[p], 0.0);
    for (std::size_t i = 0; i < lo.images.size(); ++i) {
        if (lo.images[i] == 0.0) { ASSERT_EQ(hi.images[i], 0.0); }
    }
}

TEST(Prepare, IdempotentOnItsOwnOutput) {
    const Dataset ds = prepare(synthetic(30));
    const Dataset again = prepare(to_raw(ds));
    EXPECT_EQ(again.images, ds.images);
    EXPECT_EQ(again.labels, ds.labels);
    EXPECT_EQ(again.provenance.dropped, 0u);
    EXPECT_EQ(head(ds, 5).size(), 5u);
    EXPECT_EQ(head(ds, 500).size(), ds.size());
}

TEST(Batches, SizesOrderAndDeterminism) {
    const Dataset ds = prepare(synthetic(11));  // 10 samples after dropping one six
    ASSERT_EQ(ds.size(), 10u);
    RngStream r(1, 1);
    BatchIterator it(ds, 4, r, false);
    EXPECT_EQ(it.batch_count(), 3u);
    std::vector<std::size_t> sizes, seen;
    Batch b;
    while (it.next(b)) {
        sizes.push_back(b.labels.size());
        EXPECT_EQ(b.images.extent(0), b.labels.size());
        seen.insert(seen.end(), b.indices.begin(), b.indices.end());
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
    EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));

    RngStream a(9, 2), c(9, 2);
    BatchIterator s1(ds, 3, a, true), s2(ds, 3, c, true);
    EXPECT_EQ(s1.order(), s2.order());
    std::vector<std::size_t> sorted = s1.order();
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, seen);
    EXPECT_NE(s1.order(), seen);

    const Batch g = gather(ds, {3, 7});
    EXPECT_EQ(g.labels[1], ds.labels[7]);
    EXPECT_EQ(g.images.at(1, 5, 9), ds.images.at(7, 5, 9));
    EXPECT_THROW(gather(ds, {10}), std::out_of_range);
    EXPECT_THROW(BatchIterator(ds, 0, r, false), std::invalid_argument);
}

TEST(Mnist, BundledSubsetLoads) {
    const Dataset train = load_mnist(MIXSIG_DATA_DIR, Split::train);
    const Dataset test = load_mnist(MIXSIG_DATA_DIR, Split::test);
    EXPECT_GE(train.size(), 5000u);
    EXPECT_GE(test.size(), 2000u);
    EXPECT_EQ(test.split, Split::test);
    EXPECT_GT(train.provenance.dropped, 0u);
    std::vector<std::size_t> counts(kNumClasses, 0);
    for (auto l : train.labels) ++counts[l];
    for (auto c : counts) EXPECT_GT(c, 0u);
    EXPECT_NE(train.provenance.images_source.find("train-images"), std::string::npos);
}

TEST(Mnist, DirectoryResolution) {
    EXPECT_EQ(resolve_data_dir("/some/dir"), std::filesystem::path("/some/dir"));
    const char* old = std::getenv("MIXSIG_MNIST_DIR");
    const std::string saved = old ? old : "";
    ::setenv("MIXSIG_MNIST_DIR", "/from/env", 1);
    EXPECT_EQ(resolve_data_dir(""), std::filesystem::path("/from/env"));
    ::unsetenv("MIXSIG_MNIST_DIR");
    EXPECT_THROW(resolve_data_dir(""), std::invalid_argument);
    if (old) ::setenv("MIXSIG_MNIST_DIR", saved.c_str(), 1);
    testkit::TempDir empty("nomnist");
    EXPECT_THROW(load_mnist(empty.path(), Split::train), IdxError);
}
