#include <bit>
#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "mixsig/io.hpp"
#include "mixsig/model.hpp"

namespace mixsig::model {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'N', 'N'};
constexpr const char* kBnFields[5] = {"gamma", "mu", "sigma", "running_mu", "running_sigma"};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_tensor(std::string& out, const Tensor& t) {
    put_u64(out, t.rank());
    for (auto e : t.shape()) put_u64(out, e);
    for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    std::uint64_t u(int width, const char* what) {
        need(static_cast<std::size_t>(width), what);
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    Tensor tensor(const std::string& name) {
        const std::uint64_t rank = u(8, name.c_str());
        if (rank == 0 || rank > 8) throw std::runtime_error("model file: tensor '" + name + "' has bad rank");
        Shape shape;
        std::uint64_t count = 1;
        for (std::uint64_t i = 0; i < rank; ++i) {
            const std::uint64_t e = u(8, name.c_str());
            if (e == 0 || e > (1u << 24)) throw std::runtime_error("model file: tensor '" + name + "' has bad extent");
            shape.push_back(static_cast<std::size_t>(e));
            count *= e;
        }
        need(count * 8, name.c_str());
        std::vector<double> values(count);
        for (auto& v : values) v = std::bit_cast<double>(u(8, name.c_str()));
        return Tensor(std::move(shape), std::move(values));
    }

    std::string text(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw std::runtime_error(std::string("model file truncated while reading ") + what);
        }
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::string> tensor_names() {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < kConvLayers; ++k) names.push_back("kernels" + std::to_string(k + 1));
    for (std::size_t k = 0; k < kConvLayers; ++k) {
        for (const char* f : kBnFields) names.push_back("bn" + std::to_string(k + 1) + "." + f);
    }
    names.push_back("layer4_weights");
    return names;
}

}  // namespace

std::string serialize(const McnnModel& m) {
    if (m.bn.size() != kConvLayers) throw std::invalid_argument("serialize: model is not built");
    nlohmann::ordered_json meta;
    meta["format"] = "mixsig-mcnn";
    meta["arch_scale"] = m.scale.to_string();
    meta["channels"] = {m.channels(0), m.channels(1), m.channels(2)};
    meta["class_map"] = m.class_map;
    meta["binary_layer4"] = m.binary_layer4;
    meta["binarize_threshold"] = m.binarize_threshold;
    meta["bn_eps"] = m.bn[0].eps_bn;
    meta["bn_momentum"] = m.bn[0].momentum;
    meta["tensors"] = tensor_names();
    meta["design"] = {
        {"kernel_discretization", "L1-nearest kernel-set entry, clipped STE over the set's value range"},
        {"activation_noise", "per (pixel, input channel, output channel) before the channel sum"},
        {"batchnorm", "gamma only, population std, eps added to std"},
        {"binarize_ste_range", "(0,1)"},
        {"layer4", m.binary_layer4 ? "sign of latent weights, STE over (-1,1)" : "real-valued weighted sum"},
        {"downsample_indices", "1,4,6"},
        {"layer3_order", "batch norm, binarize, then index downsample"},
        {"optimizer", "Adam"},
    };
    meta["metadata"] = m.metadata;

    std::string out(kMagic, 4);
    put_u32(out, kModelFormatVersion);
    const auto names = tensor_names();
    put_u32(out, static_cast<std::uint32_t>(names.size()));
    for (const auto& t : m.latent_kernels) put_tensor(out, t);
    for (const auto& s : m.bn) {
        for (const Tensor* t : {&s.gamma, &s.mu, &s.sigma, &s.running_mu, &s.running_sigma}) put_tensor(out, *t);
    }
    put_tensor(out, m.layer4_weights);
    const std::string json = meta.dump(1);
    put_u64(out, json.size());
    out += json;
    return out;
}

McnnModel deserialize(const std::string& bytes, std::optional<ArchScale> expected_scale) {
    Reader r(bytes);
    if (r.text(4, "magic") != std::string(kMagic, 4)) throw std::runtime_error("model file: bad magic (not an MCNN file)");
    const auto version = r.u(4, "version");
    if (version != kModelFormatVersion) {
        throw std::runtime_error("model file: format version " + std::to_string(version) + ", this build reads " +
                                 std::to_string(kModelFormatVersion));
    }
    const auto names = tensor_names();
    if (r.u(4, "tensor count") != names.size()) throw std::runtime_error("model file: unexpected tensor count");

    McnnModel m;
    std::size_t n = 0;
    for (auto& t : m.latent_kernels) {
        t = r.tensor(names[n++]);
        if (t.rank() != 4) throw std::runtime_error("model file: " + names[n - 1] + " is not a rank-4 kernel tensor");
    }
    for (std::size_t k = 0; k < kConvLayers; ++k) {
        layers::BatchNormState s(m.latent_kernels[k].extent(3));
        for (Tensor* t : {&s.gamma, &s.mu, &s.sigma, &s.running_mu, &s.running_sigma}) {
            Tensor loaded = r.tensor(names[n++]);
            if (loaded.shape() != t->shape()) throw std::runtime_error("model file: " + names[n - 1] + " shape mismatch");
            *t = std::move(loaded);
        }
        m.bn.push_back(std::move(s));
    }
    m.layer4_weights = r.tensor(names[n++]);
    const auto meta_len = r.u(8, "metadata length");
    const std::string json = r.text(static_cast<std::size_t>(meta_len), "metadata");
    if (!r.at_end()) throw std::runtime_error("model file: trailing bytes after metadata");

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(json);
        m.scale = ArchScale::parse(meta.at("arch_scale").get<std::string>());
        m.class_map = meta.at("class_map").get<std::array<int, data::kNumClasses>>();
        m.binary_layer4 = meta.at("binary_layer4").get<bool>();
        m.binarize_threshold = meta.at("binarize_threshold").get<double>();
        for (auto& s : m.bn) {
            s.eps_bn = meta.at("bn_eps").get<double>();
            s.momentum = meta.at("bn_momentum").get<double>();
        }
        m.metadata = meta.at("metadata").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("model file: bad metadata: ") + e.what());
    }

    std::size_t q = 1;
    for (std::size_t k = 0; k < kConvLayers; ++k) {
        const Tensor& w = m.latent_kernels[k];
        if (w.rank() != 4 || w.extent(0) != 3 || w.extent(1) != 3 || w.extent(2) != q ||
            w.extent(3) != m.scale.channels(kBaseChannels[k])) {
            throw std::runtime_error("model file: " + names[k] + " shape " + shape_to_string(w.shape()) +
                                     " disagrees with scale " + m.scale.to_string());
        }
        q = w.extent(3);
    }
    if (m.layer4_weights.shape() != Shape{q}) throw std::runtime_error("model file: layer-4 weight length mismatch");
    if (expected_scale && !(*expected_scale == m.scale)) {
        throw std::runtime_error("model file: stored at scale " + m.scale.to_string() + ", expected " +
                                 expected_scale->to_string());
    }
    return m;
}

void save(const McnnModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, serialize(model));
}

McnnModel load(const std::filesystem::path& path, std::optional<ArchScale> expected_scale) {
    const std::string bytes = read_file(path);
    try {
        return deserialize(bytes, expected_scale);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace mixsig::model
