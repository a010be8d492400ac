// Batch command-line front end: degrade / train / enhance / eval / gradcheck.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "tgaf/gradcheck.hpp"
#include "tgaf/metrics.hpp"
#include "tgaf/model.hpp"
#include "tgaf/train.hpp"
#include "tgaf/video_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

class NumericalFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tgaf::FormatError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw tgaf::FormatError(path + ":" + std::to_string(lineno) +
                                    ": expected key=value, got '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

// Optional key=value config; explicit CLI flags win over file values.
void apply_train_config(const std::map<std::string, std::string>& kv, tgaf::TrainConfig& tc,
                        tgaf::ModelConfig& mc) {
    for (const auto& [key, value] : kv) {
        try {
            if (key == "lr") tc.lr = std::stod(value);
            else if (key == "beta1") tc.beta1 = std::stod(value);
            else if (key == "beta2") tc.beta2 = std::stod(value);
            else if (key == "adam_eps") tc.adam_eps = std::stod(value);
            else if (key == "charbonnier_eps") tc.charbonnier_eps = std::stod(value);
            else if (key == "batch_size") tc.batch_size = std::stoi(value);
            else if (key == "total_iters") tc.total_iters = std::stol(value);
            else if (key == "patch_size") tc.patch_size = std::stoi(value);
            else if (key == "ckpt_interval") tc.ckpt_interval = std::stol(value);
            else if (key == "seed") tc.seed = std::stoull(value);
            else if (key == "channels") mc.channels = std::stoi(value);
            else if (key == "sdcb_count") mc.sdcb_count = std::stoi(value);
            else if (key == "rcab_reduction") mc.rcab_reduction = std::stoi(value);
            else if (key == "unet_base") mc.unet_base = std::stoi(value);
            else if (key == "leaky_slope") mc.leaky_slope = std::stod(value);
            else throw tgaf::FormatError("unknown config key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw tgaf::FormatError("config key '" + key + "' has a non-numeric value '" + value +
                                    "'");
        }
    }
}

int run_degrade(const std::string& in, const std::string& out, int width, int height,
                int strength) {
    auto seq = tgaf::read_yuv420(in, width, height);
    auto frames = tgaf::luma_frames(seq);
    auto degraded = tgaf::synthetic_degrade(frames, strength);
    for (int f = 0; f < seq.frame_count(); ++f)
        for (size_t i = 0; i < seq.y[f].size(); ++i)
            seq.y[f][i] = tgaf::luma_to_byte(degraded[f].v[i]);
    tgaf::write_yuv420(seq, out);
    return kExitOk;
}

int run_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_ckpt, std::uint64_t seed, bool seed_given, bool smoke) {
    namespace fs = std::filesystem;
    tgaf::TrainConfig tc = smoke ? tgaf::TrainConfig::smoke() : tgaf::TrainConfig();
    tgaf::ModelConfig mc = smoke ? tgaf::ModelConfig::smoke() : tgaf::ModelConfig();
    if (!config_path.empty()) apply_train_config(read_kv_file(config_path), tc, mc);
    if (seed_given) tc.seed = seed;

    const auto meta_path = (fs::path(data_dir) / "meta.cfg").string();
    auto meta = read_kv_file(meta_path);
    if (!meta.count("width") || !meta.count("height"))
        throw tgaf::FormatError(meta_path + ": must define width= and height=");
    const int width = std::stoi(meta.at("width"));
    const int height = std::stoi(meta.at("height"));

    tgaf::TrainData data;
    data.raw = tgaf::luma_frames(
        tgaf::read_yuv420((fs::path(data_dir) / "raw.yuv").string(), width, height));
    data.lq = tgaf::luma_frames(
        tgaf::read_yuv420((fs::path(data_dir) / "lq.yuv").string(), width, height));
    if (data.raw.size() != data.lq.size())
        throw tgaf::FormatError("raw.yuv and lq.yuv have different frame counts");

    auto model = tgaf::build_model<float>(mc, tc.seed);
    tgaf::train_loop(model, data, tc, out_ckpt, std::cout);
    return kExitOk;
}

int run_enhance(const std::string& in, const std::string& out, int width, int height,
                const std::string& ckpt_path) {
    auto ckpt = tgaf::load_checkpoint(ckpt_path);
    auto seq = tgaf::read_yuv420(in, width, height);
    auto frames = tgaf::luma_frames(seq);
    for (int k = 0; k < seq.frame_count(); ++k) {
        auto y = tgaf::forward(tgaf::window(frames, k), ckpt.model);
        for (size_t i = 0; i < seq.y[k].size(); ++i)
            seq.y[k][i] = tgaf::luma_to_byte(y.data()[i]);
    }
    tgaf::write_yuv420(seq, out);
    return kExitOk;
}

int run_eval(const std::string& raw, const std::string& degraded, const std::string& enhanced,
             int width, int height) {
    auto r = tgaf::luma_frames(tgaf::read_yuv420(raw, width, height));
    auto d = tgaf::luma_frames(tgaf::read_yuv420(degraded, width, height));
    auto e = tgaf::luma_frames(tgaf::read_yuv420(enhanced, width, height));
    auto report = tgaf::delta_report(r, d, e);
    report.print_text(std::cout);
    return kExitOk;
}

template <typename T>
bool gradcheck_suite(double tol, T step) {
    using namespace tgaf;
    std::mt19937_64 rng(1234);
    bool ok = true;
    auto report = [&](const char* name, double err) {
        const bool pass = err < tol;
        std::cout << (pass ? "pass" : "FAIL") << " " << name << " max_rel_err=" << err << "\n";
        ok = ok && pass;
    };

    for (int trial = 0; trial < 5; ++trial) {
        {
            auto x = random_tensor<T>({1, 2, 5, 5}, rng);
            auto w = random_tensor<T>({2, 2, 3, 3}, rng);
            auto b = random_tensor<T>({1, 2, 1, 1}, rng);
            report("conv2d", gradcheck_max_err<T>(
                                 [&] { return weighted_sum(conv2d(x, w, b, 1, 1), 11 + trial); },
                                 {x, w, b}, step));
        }
        {
            auto x = random_tensor<T>({1, 2, 4, 4}, rng);
            report("leaky_relu",
                   gradcheck_max_err<T>(
                       [&] { return weighted_sum(leaky_relu(x, T(0.1)), 13 + trial); }, {x}, step));
        }
        {
            auto a = random_tensor<T>({1, 2, 3, 3}, rng);
            auto b = random_tensor<T>({1, 4, 3, 3}, rng);
            report("concat_split",
                   gradcheck_max_err<T>(
                       [&] {
                           auto parts = split_channels(concat_channels<T>({a, b}), 2);
                           return weighted_sum(parts[0], 17 + trial);
                       },
                       {a, b}, step));
        }
        {
            auto a = random_tensor<T>({1, 3, 3, 3}, rng);
            auto s = random_tensor<T>({1, 3, 1, 1}, rng);
            report("elementwise",
                   gradcheck_max_err<T>(
                       [&] { return weighted_sum(sigmoid(add(mul(a, s), a)), 19 + trial); },
                       {a, s}, step));
        }
        {
            auto x = random_tensor<T>({2, 2, 4, 4}, rng);
            report("global_avg_pool",
                   gradcheck_max_err<T>(
                       [&] { return weighted_sum(global_avg_pool(x), 23 + trial); }, {x}, step));
        }
        {
            auto f = random_tensor<T>({1, 2, 5, 5}, rng);
            Tensor<T> coords({1, 2, 3, 3}, true);
            std::uniform_real_distribution<double> pos(0.3, 3.6);
            for (auto& v : coords.data()) v = T(pos(rng));
            report("bilinear_sample",
                   gradcheck_max_err<T>(
                       [&] { return weighted_sum(bilinear_sample(f, coords), 29 + trial); },
                       {f, coords}, step));
        }
        {
            auto x = random_tensor<T>({1, 3, 5, 5}, rng);
            DeformKernel<T> kern;
            kern.weight = random_tensor<T>({2, 3, 3, 3}, rng);
            kern.bias = random_tensor<T>({1, 2, 1, 1}, rng);
            kern.deform_groups = 3;
            auto offsets = random_tensor<T>({1, offset_channels(3, 3), 5, 5}, rng);
            for (auto& v : offsets.data()) v *= T(0.7);
            report("dcn_forward",
                   gradcheck_max_err<T>(
                       [&] { return weighted_sum(dcn_forward(x, offsets, kern), 31 + trial); },
                       {x, offsets, kern.weight, kern.bias}, step));
        }
        {
            auto p = random_tensor<T>({1, 1, 4, 4}, rng);
            auto t = random_tensor<T>({1, 1, 4, 4}, rng, false);
            report("charbonnier_loss",
                   gradcheck_max_err<T>([&] { return charbonnier_loss(p, t, T(1e-3)); }, {p},
                                        step));
        }
    }
    return ok;
}

int run_gradcheck(bool f64) {
    const bool ok = f64 ? gradcheck_suite<double>(1e-4, 1e-6)
                        : gradcheck_suite<float>(3e-2, 1e-2f);
    if (!ok) throw NumericalFailure("gradient check failed");
    std::cout << "all gradient checks passed (" << (f64 ? "f64" : "f32") << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TGAFNet compressed-video enhancement toolkit"};
    app.require_subcommand(1);

    std::string in, out, ckpt, raw, degraded, enhanced, data_dir, config;
    int width = 0, height = 0, strength = 3;
    std::uint64_t seed = 0;
    bool smoke = false, f64 = false;

    auto* cmd_degrade = app.add_subcommand("degrade", "apply the synthetic compression proxy");
    cmd_degrade->add_option("--in", in)->required();
    cmd_degrade->add_option("--out", out)->required();
    cmd_degrade->add_option("--width", width)->required();
    cmd_degrade->add_option("--height", height)->required();
    cmd_degrade->add_option("--strength", strength)->check(CLI::Range(1, 5));

    auto* cmd_train = app.add_subcommand("train", "train a model on a degraded/raw pair");
    cmd_train->add_option("--data-dir", data_dir)->required();
    cmd_train->add_option("--config", config);
    cmd_train->add_option("--out-ckpt", ckpt)->required();
    auto* seed_opt = cmd_train->add_option("--seed", seed);
    cmd_train->add_flag("--smoke", smoke, "desk-scale profile (C=16, L=1, batch 4)");

    auto* cmd_enhance = app.add_subcommand("enhance", "enhance a degraded sequence");
    cmd_enhance->add_option("--in", in)->required();
    cmd_enhance->add_option("--out", out)->required();
    cmd_enhance->add_option("--width", width)->required();
    cmd_enhance->add_option("--height", height)->required();
    cmd_enhance->add_option("--ckpt", ckpt)->required();

    auto* cmd_eval = app.add_subcommand("eval", "report PSNR/SSIM deltas");
    cmd_eval->add_option("--raw", raw)->required();
    cmd_eval->add_option("--degraded", degraded)->required();
    cmd_eval->add_option("--enhanced", enhanced)->required();
    cmd_eval->add_option("--width", width)->required();
    cmd_eval->add_option("--height", height)->required();

    auto* cmd_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suites");
    cmd_gradcheck->add_flag("--f64", f64, "64-bit mode (strict tolerance)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUsage;
    }

    try {
        if (cmd_degrade->parsed()) return run_degrade(in, out, width, height, strength);
        if (cmd_train->parsed())
            return run_train(data_dir, config, ckpt, seed, seed_opt->count() > 0, smoke);
        if (cmd_enhance->parsed()) return run_enhance(in, out, width, height, ckpt);
        if (cmd_eval->parsed()) return run_eval(raw, degraded, enhanced, width, height);
        if (cmd_gradcheck->parsed()) return run_gradcheck(f64);
    } catch (const NumericalFailure& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitNumerical;
    } catch (const tgaf::FormatError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitData;
    }
    return kExitUsage;
}
