#include "mixsig/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "mixsig/data.hpp"
#include "mixsig/io.hpp"
#include "mixsig/model.hpp"
#include "mixsig/optics.hpp"

namespace mixsig::cli {

namespace fs = std::filesystem;

// Formatting helpers ----------------------------------------------------------------

namespace {

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
    double v = 0.0;
    const std::string t = trim(text);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw std::invalid_argument("--" + key + ": '" + text + "' is not a number");
    }
    return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
    const double v = parse_number(key, text);
    if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("--" + key + ": expected a non-negative integer");
    return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off" || t.empty()) return false;
    throw std::invalid_argument("--" + key + ": '" + text + "' is not a boolean");
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos || trim(t.substr(0, eq)).empty()) {
            throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
        }
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::string norm = text;
    std::replace(norm.begin(), norm.end(), ',', ' ');
    std::istringstream in(norm);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_number("list", tok));
    if (out.empty()) throw std::invalid_argument("empty value list '" + text + "'");
    return out;
}

std::string format_sweep_csv(const SweepResult& r) {
    std::ostringstream os;
    os << "# mixsig sweep axis=" << r.axis << '\n';
    for (const auto& [k, v] : r.config) os << "# " << k << '=' << v << '\n';
    for (const auto& n : r.notes) os << "# " << n << '\n';
    os << r.column << ",mean_acc,std_acc,runs\n";
    for (const auto& row : r.rows) {
        os << shortest(row.value) << ',' << fixed(row.mean_acc, 4) << ',' << fixed(row.std_acc, 4) << ',' << row.runs
           << '\n';
    }
    return os.str();
}

bool non_increasing_within_pooled_std(const std::vector<SweepRow>& rows) {
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const double pooled = std::sqrt((rows[i].std_acc * rows[i].std_acc + rows[i + 1].std_acc * rows[i + 1].std_acc) / 2);
        if (rows[i + 1].mean_acc > rows[i].mean_acc + pooled) return false;
    }
    return true;
}

// Settings resolution ------------------------------------------------------------------

namespace {

struct Key {
    std::string name;
    std::string fallback;
    std::string help;
    bool is_flag = false;
    bool required = false;
    const char* env = nullptr;  // defaults to MIXSIG_<NAME>
};

/// Flags > config file > environment > defaults, per key.
class Settings {
public:
    Settings(CLI::App* app, std::vector<Key> keys) : app_(app), keys_(std::move(keys)) {
        app_->add_option("--config", config_path_, "key=value file with defaults for any flag");
        for (const auto& k : keys_) {
            const std::string flag = "--" + k.name;
            std::string help = k.help;
            if (!k.fallback.empty()) help += " [default: " + k.fallback + "]";
            if (k.is_flag) {
                options_[k.name] = app_->add_flag(flag, flags_[k.name], help);
            } else {
                options_[k.name] = app_->add_option(flag, raw_[k.name], help);
            }
        }
    }

    CLI::App* app() const noexcept { return app_; }

    void resolve() {
        std::map<std::string, std::string> file;
        if (!config_path_.empty()) file = parse_config_text(read_file(config_path_));
        for (const auto& [k, v] : file) {
            const bool known = std::any_of(keys_.begin(), keys_.end(), [&](const Key& key) { return key.name == k; });
            if (!known) throw std::invalid_argument("config file " + config_path_ + ": unknown key '" + k + "'");
        }
        for (const auto& k : keys_) {
            std::optional<std::string> v;
            if (options_[k.name]->count() > 0) {
                v = k.is_flag ? std::string(flags_[k.name] ? "true" : "false") : join(raw_[k.name]);
            } else if (auto it = file.find(k.name); it != file.end()) {
                v = it->second;
            } else if (const char* env = std::getenv(env_name(k).c_str()); env && *env) {
                v = env;
            }
            if (!v) {
                if (k.required) throw std::invalid_argument("missing required --" + k.name);
                v = k.is_flag && k.fallback.empty() ? "false" : k.fallback;
            }
            values_[k.name] = *v;
        }
    }

    const std::string& str(const std::string& key) const { return values_.at(key); }
    double number(const std::string& key) const { return parse_number(key, str(key)); }
    std::size_t count(const std::string& key) const { return parse_count(key, str(key)); }
    bool flag(const std::string& key) const { return parse_bool(key, str(key)); }
    std::vector<double> list(const std::string& key) const {
        try {
            return parse_number_list(str(key));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("--" + key + ": " + e.what());
        }
    }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    static std::string join(const std::vector<std::string>& parts) {
        std::string s;
        for (const auto& p : parts) s += (s.empty() ? "" : ",") + p;
        return s;
    }

    static std::string env_name(const Key& k) {
        if (k.env) return k.env;
        std::string s = "MIXSIG_";
        for (char c : k.name) s.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        return s;
    }

    CLI::App* app_;
    std::vector<Key> keys_;
    std::string config_path_;
    std::map<std::string, CLI::Option*> options_;
    std::map<std::string, std::vector<std::string>> raw_;
    std::map<std::string, bool> flags_;
    std::map<std::string, std::string> values_;
};

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

const Key kDataDir{"data-dir", "", "MNIST directory (IDX files, optionally .gz)", false, false, "MIXSIG_MNIST_DIR"};
const Key kThreshold{"threshold", "0.5", "input binarization threshold on intensity/255"};

fs::path require_existing(const std::string& key, const std::string& path) {
    if (path.empty()) throw std::invalid_argument("missing required --" + key);
    if (!fs::exists(path)) throw std::runtime_error("--" + key + ": " + path + " does not exist");
    return path;
}

fs::path data_dir(const Settings& s) {
    const fs::path dir = data::resolve_data_dir(s.str("data-dir"));
    if (!fs::is_directory(dir)) throw std::runtime_error("data directory " + dir.string() + " does not exist");
    return dir;
}

void echo_config(std::ostringstream& os, const std::string& command, const Settings& s) {
    os << "# mixsig " << command << '\n';
    for (const auto& [k, v] : s.values()) os << "# " << k << '=' << v << '\n';
}

// gen-kernels ---------------------------------------------------------------------------

std::vector<Key> gen_kernel_keys() {
    return {
        {"mode", "phase", "phase or identity"},
        {"pad", std::to_string(optics::kDefaultPad), "Fourier grid size P"},
        {"max-truncation", "1.0", "fail if any kernel leaks more energy than this outside 3x3"},
        {"out", "", "kernel-set file to write", false, true},
    };
}

void cmd_gen_kernels(const Settings& s, std::ostream& out) {
    optics::KernelSetOptions opt;
    opt.mode = optics::parse_kernel_mode(s.str("mode"));
    opt.pad = s.count("pad");
    opt.max_truncation_energy = s.number("max-truncation");
    const KernelSet set = optics::build_kernel_set(opt);
    optics::write_kernel_set(s.str("out"), set);
    const auto sum = optics::summarize_distortion(set);
    out << "entries=" << set.size() << " mean_rmse=" << fixed(sum.mean_rmse, 6) << " max_rmse=" << fixed(sum.max_rmse, 6)
        << " max_truncation_energy=" << fixed(sum.max_truncation_energy, 6) << " out=" << s.str("out") << '\n';
}

// train -----------------------------------------------------------------------------------

std::vector<Key> train_keys() {
    return {
        {"kernels", "", "kernel-set file", false, true},
        {"sigma", "0.5", "activation noise sigma during training"},
        {"baseline", "", "train without activation noise", true},
        {"scale", "1", "channel scale, e.g. 1/4"},
        {"epochs", "10", "training epochs"},
        {"batch", "64", "batch size"},
        {"seed", "1", "random seed"},
        {"lr", "0.001", "Adam learning rate"},
        {"beta1", "0.9", "Adam beta1"},
        {"beta2", "0.999", "Adam beta2"},
        kDataDir,
        kThreshold,
        {"train-count", "0", "training samples taken from the train split (0: all not held out)"},
        {"val-count", "1000", "samples after the training ones held out for validation"},
        {"val-sigma", "0", "noise sigma for the per-epoch validation accuracy"},
        {"binary-layer4", "", "binarize the output-layer weights", true},
        {"per-element-noise", "", "draw noise per input channel instead of per summed activation", true},
        {"out", "", "model file to write", false, true},
        {"log", "", "loss CSV (default: <out>.loss.csv)"},
    };
}

void cmd_train(const Settings& s, std::ostream& out) {
    // Every input is checked before any compute.
    const fs::path kernels_path = require_existing("kernels", s.str("kernels"));
    const fs::path dir = data_dir(s);
    const fs::path out_path = s.str("out");
    const fs::path log_path = s.str("log").empty() ? fs::path(out_path.string() + ".loss.csv") : fs::path(s.str("log"));

    model::TrainConfig cfg;
    cfg.learning_rate = s.number("lr");
    cfg.beta1 = s.number("beta1");
    cfg.beta2 = s.number("beta2");
    cfg.batch_size = s.count("batch");
    cfg.epochs = s.count("epochs");
    cfg.seed = s.count("seed");
    cfg.baseline_mode = s.flag("baseline");
    cfg.validate();
    const auto scale = model::ArchScale::parse(s.str("scale"));

    model::ErrorConfig err;
    err.kernel_set = optics::read_kernel_set(kernels_path);
    err.train_sigma = s.number("sigma");
    err.eval_sigma = s.number("val-sigma");
    err.per_element_noise = s.flag("per-element-noise");
    err.validate();

    const data::Dataset all = data::load_mnist(dir, data::Split::train, s.number("threshold"));
    const std::size_t val_count = s.count("val-count");
    if (val_count >= all.size()) throw std::invalid_argument("--val-count leaves no training data");
    std::size_t train_count = s.count("train-count");
    if (train_count == 0) train_count = all.size() - val_count;
    if (train_count + val_count > all.size()) {
        throw std::invalid_argument("--train-count + --val-count = " + std::to_string(train_count + val_count) +
                                    " exceeds the " + std::to_string(all.size()) + " usable training samples");
    }
    std::vector<std::size_t> train_idx(train_count), val_idx(val_count);
    for (std::size_t i = 0; i < train_count; ++i) train_idx[i] = i;
    for (std::size_t i = 0; i < val_count; ++i) val_idx[i] = train_count + i;
    const auto to_dataset = [&](const std::vector<std::size_t>& idx) {
        data::Dataset d;
        if (idx.empty()) return d;
        auto b = data::gather(all, idx);
        d.images = std::move(b.images);
        d.labels = std::move(b.labels);
        d.split = all.split;
        d.provenance = all.provenance;
        return d;
    };
    const data::Dataset train_set = to_dataset(train_idx);
    const data::Dataset val_set = to_dataset(val_idx);

    model::McnnModel m = model::build(scale, cfg.seed);
    m.binary_layer4 = s.flag("binary-layer4");
    for (const auto& [k, v] : s.values()) m.metadata["train." + k] = v;
    m.metadata["train.effective_sigma"] = shortest(cfg.baseline_mode ? 0.0 : err.train_sigma);
    m.metadata["data.images_crc32"] = std::to_string(all.provenance.images_crc32);
    m.metadata["data.labels_crc32"] = std::to_string(all.provenance.labels_crc32);
    m.metadata["data.threshold"] = shortest(all.provenance.threshold);
    m.metadata["kernel_set"] = optics::format_kernel_set(err.kernel_set);

    const Timer timer;
    auto result = model::train(std::move(m), train_set, val_set.size() ? &val_set : nullptr, cfg, err,
                               [&](const model::EpochLog& e) {
                                   out << "epoch=" << e.epoch << " train_loss=" << fixed(e.train_loss, 6)
                                       << " val_acc=" << fixed(e.val_acc, 4) << " elapsed_s=" << fixed(timer.seconds(), 1)
                                       << '\n'
                                       << std::flush;
                               });
    model::save(result.model, out_path);

    std::ostringstream os;
    echo_config(os, "train", s);
    os << "epoch,train_loss,val_acc\n";
    for (const auto& e : result.log) {
        os << e.epoch << ',' << fixed(e.train_loss, 6) << ',' << (std::isnan(e.val_acc) ? "nan" : fixed(e.val_acc, 4))
           << '\n';
    }
    write_file_atomic(log_path, os.str());
    out << "model=" << out_path.string() << " log=" << log_path.string() << '\n';
}

// evaluation context --------------------------------------------------------------------

std::vector<Key> eval_keys() {
    return {
        {"model", "", "model file", false, true},
        {"kernels", "", "kernel-set file (default: the set stored in the model)"},
        kDataDir,
        kThreshold,
        {"test-count", "0", "test samples to use (0: all)"},
        {"runs", std::to_string(model::kDefaultRuns), "noisy inference runs per point"},
        {"seed", "1", "random seed"},
        {"per-element-noise", "", "draw noise per input channel instead of per summed activation", true},
    };
}

struct EvalContext {
    model::McnnModel model;
    model::ErrorConfig err;
    data::Dataset test;
    std::size_t runs = model::kDefaultRuns;
    std::uint64_t seed = 1;
};

EvalContext load_context(const Settings& s) {
    const fs::path model_path = require_existing("model", s.str("model"));
    if (!s.str("kernels").empty()) require_existing("kernels", s.str("kernels"));
    const fs::path dir = data_dir(s);

    EvalContext ctx;
    ctx.runs = s.count("runs");
    if (ctx.runs == 0) throw std::invalid_argument("--runs must be >= 1");
    ctx.seed = s.count("seed");
    ctx.model = model::load(model_path);
    if (!s.str("kernels").empty()) {
        ctx.err.kernel_set = optics::read_kernel_set(s.str("kernels"));
    } else if (auto it = ctx.model.metadata.find("kernel_set"); it != ctx.model.metadata.end()) {
        ctx.err.kernel_set = optics::parse_kernel_set(it->second);
    } else {
        throw std::invalid_argument("model carries no kernel set; pass --kernels");
    }
    ctx.err.train_sigma = 0.0;
    ctx.err.per_element_noise = s.flag("per-element-noise");
    ctx.test = data::load_mnist(dir, data::Split::test, s.number("threshold"));
    if (const std::size_t n = s.count("test-count"); n > 0) ctx.test = data::head(ctx.test, n);
    return ctx;
}

SweepRow eval_row(const EvalContext& ctx, const model::ErrorConfig& err, double value, model::EvalResult* detail = nullptr) {
    const auto r = model::evaluate(ctx.model, ctx.test, err, ctx.runs, ctx.seed);
    if (detail) *detail = r;
    return {value, r.mean_acc, r.std_acc, ctx.runs};
}

SweepResult new_sweep(const Settings& s, const EvalContext& ctx, std::string axis, std::string column) {
    SweepResult r;
    r.axis = std::move(axis);
    r.column = std::move(column);
    r.config = s.values();
    r.config.erase("out");  // reruns to another path stay byte-identical
    r.config["test_samples"] = std::to_string(ctx.test.size());
    r.config["model_scale"] = ctx.model.scale.to_string();
    if (auto it = ctx.err.kernel_set.info.find("mode"); it != ctx.err.kernel_set.info.end()) {
        r.config["kernel_mode"] = it->second;
    }
    return r;
}

void finish_sweep(const Settings& s, const SweepResult& r, std::ostream& out) {
    write_file_atomic(s.str("out"), format_sweep_csv(r));
    for (const auto& row : r.rows) {
        out << r.column << '=' << shortest(row.value) << " mean_acc=" << fixed(row.mean_acc, 4)
            << " std_acc=" << fixed(row.std_acc, 4) << " runs=" << row.runs << '\n';
    }
    out << "out=" << s.str("out") << " wall_s=" << fixed(r.wall_seconds, 1) << '\n';
}

std::vector<Key> with_keys(std::vector<Key> base, std::initializer_list<Key> extra) {
    base.insert(base.end(), extra);
    return base;
}

// evaluate --------------------------------------------------------------------------------

std::vector<Key> evaluate_keys() {
    return with_keys(eval_keys(), {
                                      {"sigma", "0", "activation noise sigma"},
                                      {"residue", "0", "residue kernel-error RMSE"},
                                      {"bits", "0", "stochastic activation quantization bits (0: off)"},
                                  });
}

void cmd_evaluate(const Settings& s, std::ostream& out) {
    EvalContext ctx = load_context(s);
    ctx.err.eval_sigma = s.number("sigma");
    ctx.err.residue_rmse = s.number("residue");
    if (const auto bits = s.count("bits"); bits > 0) {
        if (bits > 16) throw std::invalid_argument("--bits must be <= 16");
        ctx.err.activation_quant = model::ActivationQuant{1 << bits, 0.0, 9.0};
    }
    const auto r = model::evaluate(ctx.model, ctx.test, ctx.err, ctx.runs, ctx.seed);
    out << "mean_acc=" << fixed(r.mean_acc, 4) << " std_acc=" << fixed(r.std_acc, 4) << " runs=" << ctx.runs
        << " samples=" << ctx.test.size() << '\n';
}

// sweeps ------------------------------------------------------------------------------------

void cmd_sweep_noise(const Settings& s, std::ostream& out) {
    const auto sigmas = s.list("sigmas");
    for (double v : sigmas) {
        if (v < 0.0) throw std::invalid_argument("--sigmas: negative sigma");
    }
    EvalContext ctx = load_context(s);
    const Timer timer;
    SweepResult r = new_sweep(s, ctx, "noise_sigma", "sigma");
    for (double sigma : sigmas) {
        model::ErrorConfig err = ctx.err;
        err.eval_sigma = sigma;
        r.rows.push_back(eval_row(ctx, err, sigma));
    }
    r.wall_seconds = timer.seconds();
    finish_sweep(s, r, out);
}

void cmd_sweep_bits(const Settings& s, std::ostream& out) {
    const auto bits = s.list("bits");
    for (double b : bits) {
        if (b < 1.0 || b > 16.0 || b != std::floor(b)) throw std::invalid_argument("--bits: expected integers in [1, 16]");
    }
    const double lo = s.number("quant-lo");
    const double hi = s.number("quant-hi");
    EvalContext ctx = load_context(s);
    const Timer timer;
    SweepResult r = new_sweep(s, ctx, "quant_bits", "bits");
    for (double b : bits) {
        model::ErrorConfig err = ctx.err;
        err.eval_sigma = 0.0;
        err.activation_quant = model::ActivationQuant{1 << static_cast<int>(b), lo, hi};
        r.rows.push_back(eval_row(ctx, err, b));
        r.notes.push_back("levels[" + shortest(b) + "]=" + std::to_string(err.activation_quant->levels));
    }
    r.wall_seconds = timer.seconds();
    finish_sweep(s, r, out);
}

void cmd_sweep_residue(const Settings& s, std::ostream& out) {
    const auto rmses = s.list("rmses");
    for (double v : rmses) {
        if (v < 0.0) throw std::invalid_argument("--rmses: negative rmse");
    }
    EvalContext ctx = load_context(s);
    const Timer timer;
    SweepResult r = new_sweep(s, ctx, "residue_rmse", "rmse");
    r.config["residue_target"] = "effective kernels of the device; selection stays on the calibrated set";
    for (double target : rmses) {
        model::ErrorConfig err = ctx.err;
        err.eval_sigma = s.number("sigma");
        err.residue_rmse = target;
        model::EvalResult detail;
        r.rows.push_back(eval_row(ctx, err, target, &detail));
        std::string achieved;
        for (double a : detail.residue_achieved) achieved += (achieved.empty() ? "" : ";") + fixed(a, 15);
        if (!achieved.empty()) r.notes.push_back("achieved_rmse[" + shortest(target) + "]=" + achieved);
    }
    r.notes.push_back(std::string("non_increasing_within_pooled_std=") +
                      (non_increasing_within_pooled_std(r.rows) ? "yes" : "no"));
    r.wall_seconds = timer.seconds();
    finish_sweep(s, r, out);
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const data::IdxError*>(&e)) return "data";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
    if (dynamic_cast<const std::domain_error*>(&e)) return "domain";
    if (dynamic_cast<const std::runtime_error*>(&e)) return "runtime";
    if (dynamic_cast<const std::logic_error*>(&e)) return "internal";
    return "unknown";
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mixed-signal binary CNN simulator"};
    app.name("mixsig");
    app.require_subcommand(1);

    struct Command {
        std::unique_ptr<Settings> settings;
        std::function<void(const Settings&, std::ostream&)> action;
    };
    std::vector<Command> commands;
    const auto add = [&](const char* name, const char* help, std::vector<Key> keys,
                         std::function<void(const Settings&, std::ostream&)> action) {
        commands.push_back({std::make_unique<Settings>(app.add_subcommand(name, help), std::move(keys)), std::move(action)});
    };
    add("gen-kernels", "build the 511-entry effective kernel set", gen_kernel_keys(), cmd_gen_kernels);
    add("train", "train an MCNN with error-aware forward passes", train_keys(), cmd_train);
    add("evaluate", "accuracy of a model under one error setting", evaluate_keys(), cmd_evaluate);
    add("sweep-noise", "accuracy vs activation noise sigma",
        with_keys(eval_keys(), {{"sigmas", "0,0.25,0.5,0.75,1", "noise sigmas"},
                                {"out", "", "CSV to write", false, true}}),
        cmd_sweep_noise);
    add("sweep-bits", "accuracy vs stochastic activation quantization bits",
        with_keys(eval_keys(), {{"bits", "3,2,1", "bit widths (2^b levels)"},
                                {"quant-lo", "0", "low end of the quantization range"},
                                {"quant-hi", "9", "high end of the quantization range"},
                                {"out", "", "CSV to write", false, true}}),
        cmd_sweep_bits);
    add("sweep-residue", "accuracy vs residue kernel-error RMSE",
        with_keys(eval_keys(), {{"rmses", "0,0.25,0.5,1", "residue RMSE targets"},
                                {"sigma", "0", "activation noise sigma during the sweep"},
                                {"out", "", "CSV to write", false, true}}),
        cmd_sweep_residue);

    std::string command = "mixsig";
    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) return app.exit(e, out, err);
            throw std::invalid_argument(e.what());
        }
        for (auto& c : commands) {
            if (!c.settings->app()->parsed()) continue;
            command = c.settings->app()->get_name();
            c.settings->resolve();
            c.action(*c.settings, out);
            return 0;
        }
        throw std::invalid_argument("no subcommand given");
    } catch (const std::exception& e) {
        const std::string kind = error_kind(e);
        err << "mixsig: error command=" << command << " kind=" << kind << " message=\"" << one_line(e.what()) << "\"\n";
        return kind == "invalid_argument" ? 2 : 1;
    }
}

}  // namespace mixsig::cli
