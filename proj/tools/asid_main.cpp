#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "asid/accounting.hpp"
#include "asid/config.hpp"
#include "asid/errors.hpp"
#include "asid/gradsuite.hpp"
#include "asid/image_io.hpp"
#include "asid/metrics.hpp"
#include "asid/network.hpp"
#include "asid/sampler.hpp"
#include "asid/trainer.hpp"
#include "asid/weight_store.hpp"

namespace fs = std::filesystem;
using namespace asid;

namespace {

constexpr double kGradTolerance = 1e-4;

std::string fmt6(double v) {
    std::ostringstream out;
    out << std::setprecision(6) << v;
    return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

// ---- config resolution ------------------------------------------------------

struct ConfigCli {
    std::string config_path;
    std::vector<std::string> sets;
    int scale = 0; // 0 = not given
};

void add_config_flags(CLI::App* cmd, ConfigCli& c) {
    cmd->add_option("--config", c.config_path,
                    "Config file (key=value lines); defaults to $ASID_CONFIG");
    cmd->add_option("--set", c.sets, "Override one config key (key=value, repeatable)");
    cmd->add_option("--scale", c.scale, "Upscaling factor (shorthand for --set scale=N)")
        ->check(CLI::Range(2, 4));
}

ModelConfig resolve_config(const ConfigCli& c) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::string path = c.config_path;
    if (path.empty())
        if (const char* env = std::getenv("ASID_CONFIG")) path = env;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open config file '" + path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        kv = parse_config_pairs(buf.str());
    }
    for (const std::string& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects key=value, got '" + s + "'");
        kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.scale != 0) kv.emplace_back("scale", std::to_string(c.scale));
    return config_from_updates(kv);
}

void print_config(const ModelConfig& cfg) {
    std::cout << "resolved config:\n";
    std::istringstream lines(serialize_config(cfg));
    std::string line;
    while (std::getline(lines, line)) std::cout << "  " << line << "\n";
}

std::pair<int, int> parse_geometry(const std::string& s) { // "WxH" -> (w, h)
    const auto x = s.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= s.size())
        throw ConfigError("--geometry expects WxH (e.g. 1280x720), got '" + s + "'");
    int w = 0, h = 0;
    try {
        w = std::stoi(s.substr(0, x));
        h = std::stoi(s.substr(x + 1));
    } catch (const std::exception&) {
        throw ConfigError("--geometry expects integers, got '" + s + "'");
    }
    if (w < 1 || h < 1) throw ConfigError("--geometry must be positive, got '" + s + "'");
    return {w, h};
}

Dtype parse_dtype(const std::string& s) {
    if (s == "f32") return Dtype::F32;
    if (s == "f64") return Dtype::F64;
    throw ConfigError("dtype must be f32 or f64, got '" + s + "'");
}

// ---- subcommands ------------------------------------------------------------

struct BuildOpts {
    ConfigCli config;
    std::string out;
    std::uint64_t seed = 0;
    std::string dtype = "f32";
};

void run_build(const BuildOpts& o) {
    const ModelConfig cfg = resolve_config(o.config);
    print_config(cfg);
    const ParamMap params = build_model(cfg, o.seed, parse_dtype(o.dtype));
    save_weights(o.out, cfg, params);
    std::cout << "wrote " << o.out << ": " << params.size() << " tensors, "
              << param_element_count(params) << " parameters\n";
}

struct TrainOpts {
    ConfigCli config;
    std::string weights, out, manifest, log, loss = "l1", dtype = "f32";
    std::uint64_t seed = 0;
    int patch = 64, batch = 16, epochs = 10, steps_per_epoch = 50;
    int halve_period = 250, checkpoint_every = 0;
    double lr0 = 5e-4;
    bool no_augment = false;
};

void run_train(const TrainOpts& o) {
    const Dtype dt = parse_dtype(o.dtype);
    ModelConfig cfg;
    ParamMap params;
    AdamState resume;
    bool have_resume = false;
    if (!o.weights.empty()) {
        LoadedModel loaded = load_weights(o.weights, dt);
        cfg = loaded.config;
        params = std::move(loaded.params);
        const std::string sidecar = o.weights + ".opt";
        if (fs::exists(sidecar)) {
            resume = load_optimizer(sidecar, params);
            have_resume = true;
            std::cout << "resuming optimizer state at step " << resume.step << "\n";
        }
    } else {
        cfg = resolve_config(o.config);
        params = build_model(cfg, o.seed, dt);
    }
    print_config(cfg);

    const std::vector<std::string> paths = read_manifest(o.manifest);
    if (paths.empty()) throw DataError("manifest '" + o.manifest + "' lists no images");
    std::vector<Image> images;
    images.reserve(paths.size());
    for (const std::string& p : paths) images.push_back(read_image(p));

    PatchSampler sampler(std::move(images), cfg.scale, o.patch, !o.no_augment, o.seed);

    TrainConfig tc;
    tc.batch = o.batch;
    tc.epochs = o.epochs;
    tc.steps_per_epoch = o.steps_per_epoch;
    tc.lr0 = o.lr0;
    tc.halve_period = o.halve_period;
    tc.seed = o.seed;
    tc.loss = o.loss;
    tc.checkpoint_every = o.checkpoint_every;
    tc.checkpoint_path = o.out;
    tc.log_path = o.log;

    const TrainResult result =
        train_loop(cfg, params, sampler, tc, have_resume ? &resume : nullptr);
    std::cout << "trained " << result.steps << " steps, final loss "
              << fmt6(result.final_loss) << "\n";
    std::cout << "wrote " << o.out << "\n";
}

struct InferOpts {
    std::string weights, out, dtype = "f32";
    std::vector<std::string> inputs;
};

void run_infer(const InferOpts& o) {
    const LoadedModel loaded = load_weights(o.weights, parse_dtype(o.dtype));
    print_config(loaded.config);

    const std::string ext = fs::path(o.out).extension().string();
    const bool out_is_file = o.inputs.size() == 1 && (ext == ".png" || ext == ".bmp");
    if (!out_is_file) fs::create_directories(o.out);

    for (const std::string& in_path : o.inputs) {
        const Image lr = read_image(in_path);
        const Tensor t = image_to_tensor(lr, loaded.params.begin()->second.dtype());
        const Tensor sr = asid_forward(loaded.config, loaded.params, t, true);
        const Image out_img = tensor_to_image(sr);
        const std::string out_path =
            out_is_file ? o.out : (fs::path(o.out) / fs::path(in_path).filename()).string();
        write_image(out_path, out_img);
        std::cout << in_path << " " << lr.width << "x" << lr.height << " -> "
                  << out_img.width << "x" << out_img.height << " " << out_path << "\n";
    }
}

struct EvalOpts {
    std::string sr, hr, csv;
    int scale = 2;
};

void run_evaluate(const EvalOpts& o) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(o.sr)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        for (char& ch : ext) ch = static_cast<char>(std::tolower(ch));
        if (ext == ".png" || ext == ".bmp") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw DataError("no .png/.bmp files in '" + o.sr + "'");

    std::ostringstream csv;
    csv << "image,psnr,ssim\n";
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const std::string& name : names) {
        const fs::path hr_path = fs::path(o.hr) / name;
        if (!fs::exists(hr_path))
            throw DataError("no reference for '" + name + "' in '" + o.hr + "'");
        const Image sr = read_image((fs::path(o.sr) / name).string());
        const Image hr = read_image(hr_path.string());
        const EvalResult r = evaluate_pair(sr, hr, o.scale);
        std::cout << name << " psnr " << fmt6(r.psnr) << " ssim " << fmt6(r.ssim) << "\n";
        csv << name << "," << fmt6(r.psnr) << "," << fmt6(r.ssim) << "\n";
        psnr_sum += r.psnr;
        ssim_sum += r.ssim;
    }
    const double n = static_cast<double>(names.size());
    std::cout << "mean psnr " << fmt6(psnr_sum / n) << " ssim " << fmt6(ssim_sum / n)
              << " over " << names.size() << " images\n";
    csv << "mean," << fmt6(psnr_sum / n) << "," << fmt6(ssim_sum / n) << "\n";
    if (!o.csv.empty()) write_text_file(o.csv, csv.str());
}

struct CountOpts {
    ConfigCli config;
    std::string geometry = "1280x720", csv;
};

void run_count(const CountOpts& o) {
    const ModelConfig cfg = resolve_config(o.config);
    print_config(cfg);
    const auto [w, h] = parse_geometry(o.geometry);
    const CostReport report = count_macs(cfg, h, w);
    std::cout << "evaluation geometry: " << w << "x" << h << " output\n";
    std::cout << report_text(report);
    if (!o.csv.empty()) write_text_file(o.csv, report_csv(report));
}

struct GradCheckOpts {
    std::string dtype = "f64";
    bool skip_end_to_end = false;
};

void run_grad_check(const GradCheckOpts& o) {
    if (parse_dtype(o.dtype) != Dtype::F64)
        throw ConfigError("gradient checking runs in f64 only");
    const std::vector<GradSuiteCase> cases = run_gradient_suite(!o.skip_end_to_end);
    double worst = 0.0;
    for (const GradSuiteCase& c : cases) {
        std::cout << std::left << std::setw(24) << c.name << " max rel error "
                  << fmt6(c.max_rel_error) << "\n";
        worst = std::max(worst, c.max_rel_error);
    }
    std::cout << "overall max rel error " << fmt6(worst) << " over " << cases.size()
              << " cases (tolerance " << fmt6(kGradTolerance) << ")\n";
    if (!(worst < kGradTolerance))
        throw NumericError("gradient suite failed: max rel error " + fmt6(worst));
    std::cout << "gradient suite passed\n";
}

struct AblateOpts {
    std::string geometry = "1280x720", csv;
};

void run_ablate(const AblateOpts& o) {
    const auto [w, h] = parse_geometry(o.geometry);
    print_config(ModelConfig{}); // the full-model reference the variants derive from
    std::cout << "evaluation geometry: " << w << "x" << h << " output\n";
    const AblationTables tables = ablation_sweep(h, w);
    std::cout << ablation_text(tables);
    if (!o.csv.empty()) write_text_file(o.csv, ablation_csv(tables));
}

struct DumpAttentionOpts {
    std::string weights, input, out, dtype = "f32";
};

void run_dump_attention(const DumpAttentionOpts& o) {
    const LoadedModel loaded = load_weights(o.weights, parse_dtype(o.dtype));
    print_config(loaded.config);
    const Image img = read_image(o.input);
    const Tensor t = image_to_tensor(img, loaded.params.begin()->second.dtype());

    AttentionSink sink;
    asid_forward(loaded.config, loaded.params, t, true, &sink);

    fs::create_directories(o.out);
    nlohmann::json meta;
    meta["source_image"] = o.input;
    meta["config"] = serialize_config(loaded.config);
    meta["dtype"] = "f64";
    meta["byte_order"] = "little";
    meta["matrices"] = nlohmann::json::array();
    for (std::size_t i = 0; i < sink.size(); ++i) {
        const CapturedAttention& cap = sink[i];
        std::ostringstream name;
        name << "attn_" << std::setfill('0') << std::setw(3) << i << "_" << cap.module
             << "_" << cap.level << "_block" << cap.block;
        if (cap.depth > 0) name << "_depth" << cap.depth;
        name << ".bin";
        const std::string file = name.str();
        std::ofstream bin(fs::path(o.out) / file, std::ios::binary);
        if (!bin) throw DataError("cannot write '" + file + "'");
        bin.write(reinterpret_cast<const char*>(cap.matrix.data()),
                  static_cast<std::streamsize>(cap.matrix.numel() * sizeof(double)));

        nlohmann::json entry;
        entry["file"] = file;
        entry["module"] = cap.module;
        entry["level"] = cap.level;
        entry["block"] = cap.block;
        entry["depth"] = cap.depth;
        entry["shape"] = cap.matrix.shape();
        meta["matrices"].push_back(entry);
    }
    write_text_file((fs::path(o.out) / "attention.json").string(), meta.dump(2) + "\n");
    std::cout << "wrote " << sink.size() << " attention matrices to " << o.out << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ASID: lightweight super-resolution transformer toolkit"};
    app.require_subcommand(1);

    BuildOpts build_opts;
    CLI::App* build = app.add_subcommand("build", "Initialize a model and write its weight store");
    add_config_flags(build, build_opts.config);
    build->add_option("--out", build_opts.out, "Output weight store")->required();
    build->add_option("--seed", build_opts.seed, "Initialization seed");
    build->add_option("--dtype", build_opts.dtype, "Parameter dtype (f32|f64)");
    build->callback([&] { run_build(build_opts); });

    TrainOpts train_opts;
    CLI::App* train = app.add_subcommand("train", "Train on patches from a manifest of images");
    add_config_flags(train, train_opts.config);
    train->add_option("--manifest", train_opts.manifest, "Text file listing training images")
        ->required();
    train->add_option("--out", train_opts.out, "Checkpoint weight store")->required();
    train->add_option("--weights", train_opts.weights,
                      "Resume from this store (its config wins; sidecar restores ADAM)");
    train->add_option("--log", train_opts.log, "CSV training log (step,epoch,lr,loss)");
    train->add_option("--patch", train_opts.patch, "LR patch size");
    train->add_option("--batch", train_opts.batch, "Mini-batch size");
    train->add_option("--epochs", train_opts.epochs, "Epochs");
    train->add_option("--steps-per-epoch", train_opts.steps_per_epoch, "Batches per epoch");
    train->add_option("--lr0", train_opts.lr0, "Initial learning rate");
    train->add_option("--halve-period", train_opts.halve_period,
                      "Epochs between learning-rate halvings");
    train->add_option("--loss", train_opts.loss, "Loss (l1|l2)");
    train->add_option("--seed", train_opts.seed, "Sampler/init seed");
    train->add_option("--checkpoint-every", train_opts.checkpoint_every,
                      "Checkpoint period in epochs (0 = final only)");
    train->add_option("--dtype", train_opts.dtype, "Parameter dtype (f32|f64)");
    train->add_flag("--no-augment", train_opts.no_augment, "Disable flip/rotation augmentation");
    train->callback([&] { run_train(train_opts); });

    InferOpts infer_opts;
    CLI::App* infer = app.add_subcommand("infer", "Upscale images with a trained model");
    infer->add_option("--weights", infer_opts.weights, "Weight store")->required();
    infer->add_option("--input", infer_opts.inputs, "Input image(s)")->required();
    infer->add_option("--out", infer_opts.out, "Output file (single input) or directory")
        ->required();
    infer->add_option("--dtype", infer_opts.dtype, "Compute dtype (f32|f64)");
    infer->callback([&] { run_infer(infer_opts); });

    EvalOpts eval_opts;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Y-channel PSNR/SSIM of SR vs reference");
    evaluate->add_option("--sr", eval_opts.sr, "Directory of upscaled images")->required();
    evaluate->add_option("--hr", eval_opts.hr, "Directory of reference images")->required();
    evaluate->add_option("--scale", eval_opts.scale, "Scale (sets the border crop)")
        ->required()
        ->check(CLI::Range(0, 8));
    evaluate->add_option("--csv", eval_opts.csv, "Also write results as CSV");
    evaluate->callback([&] { run_evaluate(eval_opts); });

    CountOpts count_opts;
    CLI::App* count = app.add_subcommand("count", "Parameter and multiply-add report");
    add_config_flags(count, count_opts.config);
    count->add_option("--geometry", count_opts.geometry, "Output geometry WxH");
    count->add_option("--csv", count_opts.csv, "Also write the report as CSV");
    count->callback([&] { run_count(count_opts); });

    GradCheckOpts grad_opts;
    CLI::App* grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");
    grad->add_option("--dtype", grad_opts.dtype, "Check dtype (f64 only)");
    grad->add_flag("--skip-end-to-end", grad_opts.skip_end_to_end,
                   "Skip the micro end-to-end model case");
    grad->callback([&] { run_grad_check(grad_opts); });

    AblateOpts ablate_opts;
    CLI::App* ablate = app.add_subcommand("ablate", "Cost tables for the ablation variants");
    ablate->add_option("--geometry", ablate_opts.geometry, "Output geometry WxH");
    ablate->add_option("--csv", ablate_opts.csv, "Also write the tables as CSV");
    ablate->callback([&] { run_ablate(ablate_opts); });

    DumpAttentionOpts dump_opts;
    CLI::App* dump = app.add_subcommand("dump-attention", "Export attention matrices for an image");
    dump->add_option("--weights", dump_opts.weights, "Weight store")->required();
    dump->add_option("--input", dump_opts.input, "Input image")->required();
    dump->add_option("--out", dump_opts.out, "Output directory")->required();
    dump->add_option("--dtype", dump_opts.dtype, "Compute dtype (f32|f64)");
    dump->callback([&] { run_dump_attention(dump_opts); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const StoreError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
