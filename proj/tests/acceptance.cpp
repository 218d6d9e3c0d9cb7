// Release gate: ten go/no-go checks over the calibrated model family, run as
// one binary that prints a single verdict line per criterion. Exit status is
// the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "asid/accounting.hpp"
#include "asid/attention.hpp"
#include "asid/errors.hpp"
#include "asid/gradsuite.hpp"
#include "asid/image.hpp"
#include "asid/metrics.hpp"
#include "asid/network.hpp"
#include "asid/ops.hpp"
#include "asid/trainer.hpp"

using namespace asid;
using Clock = std::chrono::steady_clock;

namespace {

// pinned targets and tolerances
constexpr long long kParamTarget2 = 298'000;  // x2 total
constexpr long long kParamTarget3 = 304'000;  // x3 total
constexpr long long kParamTarget4 = 313'000;  // x4 total
constexpr long long kParamTargetD8 = 732'000; // 8-block x2 total
constexpr double kParamTol = 0.08;

constexpr long long kUpDelta3 = 6'495;  // params(x3) - params(x2), exact
constexpr long long kUpDelta4 = 15'588; // params(x4) - params(x2), exact

constexpr double kMacTarget4 = 17.2e9;    // x4 at 720p output
constexpr double kMacTarget2 = 63.592e9;  // x2 at 720p output
constexpr double kMacTol = 0.15;

constexpr long long kAblTargets[5] = {288'000, 298'000, 316'000, 365'000, 401'000};
constexpr double kAblTol = 0.10;
constexpr long long kSavingAs = 36'000; // attention sharing
constexpr long long kSavingCs = 85'000; // channel split
constexpr double kSavingTol = 0.30;

constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSec = 120.0;

constexpr double kPsnrOffsetTarget = 24.05; // uniform 16/255 error
constexpr double kPsnrOffsetTol = 0.01;
constexpr double kKernelTol = 1e-9;

constexpr double kOverfitPsnr = 35.0;
constexpr int kOverfitMaxSteps = 2000;
constexpr double kOverfitBudgetSec = 600.0;

int failures = 0;

void verdict(int k, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::printf("CRITERION %d %s — %s\n", k, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

bool within(double actual, double target, double tol) {
    return std::fabs(actual - target) <= tol * target;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

ModelConfig scaled(int scale, int blocks = 3) {
    ModelConfig cfg;
    cfg.scale = scale;
    cfg.blocks = blocks;
    return cfg;
}

Tensor rnd(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
           double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = dist(rng);
    return Tensor::from_vector(std::move(v), std::move(shape), Dtype::F64);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (long long i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

// ---- criterion bodies ----------------------------------------------------

void criterion_params() {
    const long long p2 = count_params(scaled(2)).params;
    const long long p3 = count_params(scaled(3)).params;
    const long long p4 = count_params(scaled(4)).params;
    const long long pd8 = count_params(scaled(2, 8)).params;
    const bool ok = within(p2, kParamTarget2, kParamTol) &&
                    within(p3, kParamTarget3, kParamTol) &&
                    within(p4, kParamTarget4, kParamTol) &&
                    within(pd8, kParamTargetD8, kParamTol);
    std::ostringstream d;
    d << "calibrated totals x2=" << p2 << " x3=" << p3 << " x4=" << p4
      << " d8=" << pd8 << " vs " << kParamTarget2 << "/" << kParamTarget3 << "/"
      << kParamTarget4 << "/" << kParamTargetD8 << " +-" << kParamTol * 100 << "%";
    verdict(1, ok, d.str());
}

void criterion_upsampler_deltas() {
    const long long p2 = count_params(scaled(2)).params;
    const long long d3 = count_params(scaled(3)).params - p2;
    const long long d4 = count_params(scaled(4)).params - p2;
    std::ostringstream d;
    d << "upsampler-only scale deltas x3-x2=" << d3 << " (want exactly " << kUpDelta3
      << "), x4-x2=" << d4 << " (want exactly " << kUpDelta4 << ")";
    verdict(2, d3 == kUpDelta3 && d4 == kUpDelta4, d.str());
}

void criterion_macs() {
    const long long m4 = count_macs(scaled(4), 720, 1280).macs;
    const long long m2 = count_macs(scaled(2), 720, 1280).macs;
    const bool ok = within(static_cast<double>(m4), kMacTarget4, kMacTol) &&
                    within(static_cast<double>(m2), kMacTarget2, kMacTol);
    std::ostringstream d;
    d << "multiply-adds at 1280x720 output: x4=" << m4 << " (target "
      << fmt(kMacTarget4) << "), x2=" << m2 << " (target " << fmt(kMacTarget2)
      << "), +-" << kMacTol * 100 << "%";
    verdict(3, ok, d.str());
}

void criterion_ablation() {
    const AblationTables t = ablation_sweep(720, 1280);
    long long base = 0, full = 0, cs = 0, as = 0, id = 0, inter = 0, intra = 0;
    for (const AblationRow& r : t.variants) {
        if (r.label == "baseline") base = r.params;
        if (r.label == "id+as+cs") full = r.params;
        if (r.label == "id+cs") cs = r.params;
        if (r.label == "id+as") as = r.params;
        if (r.label == "id") id = r.params;
    }
    for (const AblationRow& r : t.sharing) {
        if (r.label == "intergroup") inter = r.params;
        if (r.label == "intragroup") intra = r.params;
    }
    const long long ordered[5] = {base, full, cs, as, id};
    bool ok = true;
    for (int i = 0; i < 5; ++i) {
        if (!within(ordered[i], kAblTargets[i], kAblTol)) ok = false;
        if (i && ordered[i] <= ordered[i - 1]) ok = false;
    }
    const long long saving_as = id - as, saving_cs = id - cs;
    if (!within(saving_as, kSavingAs, kSavingTol)) ok = false;
    if (!within(saving_cs, kSavingCs, kSavingTol)) ok = false;
    if (!(inter < intra)) ok = false;
    std::ostringstream d;
    d << "variant params " << base << "<" << full << "<" << cs << "<" << as << "<"
      << id << ", sharing saves " << saving_as << " (target " << kSavingAs
      << "), split saves " << saving_cs << " (target " << kSavingCs
      << "), intergroup " << inter << " < intragroup " << intra;
    verdict(4, ok, d.str());
}

void criterion_gradients() {
    const auto t0 = Clock::now();
    const std::vector<GradSuiteCase> cases = run_gradient_suite(true);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    double worst = 0.0;
    std::string worst_name;
    for (const GradSuiteCase& c : cases)
        if (c.max_rel_error > worst) {
            worst = c.max_rel_error;
            worst_name = c.name;
        }
    const bool ok = worst < kGradTol && secs < kGradBudgetSec;
    std::ostringstream d;
    d << cases.size() << " finite-difference cases, worst rel error " << fmt(worst)
      << " (" << worst_name << ") vs " << fmt(kGradTol) << ", " << fmt(secs)
      << "s of " << fmt(kGradBudgetSec) << "s budget";
    verdict(5, ok, d.str());
}

void criterion_sharing_exactness() {
    ModelConfig cfg;
    cfg.blocks = 2;
    cfg.channels = 8;
    cfg.refined_width = 0; // equal widths so every producer tensor has a twin
    cfg.units = 2;
    cfg.meso = 2;
    cfg.global = 2;
    ParamMap params = build_model(cfg, 321, Dtype::F64);

    // consumer gets the producer's weights for everything it owns (no Q/K)
    const std::string prod = "body.block1.unit1.sam";
    const std::string cons = "body.block2.unit1.sam";
    std::vector<std::pair<std::string, Tensor>> copies;
    for (const auto& [name, t] : params)
        if (name.rfind(cons + ".", 0) == 0)
            copies.emplace_back(name, params.at(prod + name.substr(cons.size())));
    for (auto& [name, t] : copies) params[name] = t;

    const Tensor f = rnd({1, 8, 6, 6}, 77);
    SamResult pr = sam_forward(f, params, prod, cfg, true, nullptr, 1, 1);
    reset_op_counters();
    const Tensor consumed =
        sam_forward(f, params, cons, cfg, false, &pr.produced, 2, 1).out;
    const long long consumer_softmax = op_counters().softmax_calls;

    const bool ok = bitwise_equal(pr.out, consumed) && consumer_softmax == 0;
    std::ostringstream d;
    d << "consumer output " << (bitwise_equal(pr.out, consumed) ? "==" : "!=")
      << " producer output bitwise with shared matrices; consumer softmax calls "
      << consumer_softmax << " (want 0)";
    verdict(6, ok, d.str());
}

void criterion_invariants() {
    std::mt19937_64 rng(99);
    bool ok = true;
    std::string first_break;
    auto fail = [&](const std::string& what) {
        ok = false;
        if (first_break.empty()) first_break = what;
    };

    // window partitions and pixel shuffle round trip bitwise
    for (int trial = 0; trial < 20; ++trial) {
        const int P = 1 + static_cast<int>(rng() % 4);
        const int G = 1 + static_cast<int>(rng() % 4);
        const int B = 1 + static_cast<int>(rng() % 2);
        const int C = 1 + static_cast<int>(rng() % 6);
        const int H = static_cast<int>(P * G * (1 + rng() % 3));
        const int W = static_cast<int>(P * G * (1 + rng() % 3));
        const Tensor x = rnd({B, C, H, W}, rng());
        if (!bitwise_equal(departition_meso(partition_meso(x, P), P, B, C, H, W), x))
            fail("meso partition round trip");
        if (!bitwise_equal(departition_global(partition_global(x, G), G, B, C, H, W), x))
            fail("global partition round trip");
        const int r = 1 + static_cast<int>(rng() % 3);
        const Tensor y = rnd({B, C * r * r, H, W}, rng());
        if (!bitwise_equal(pixel_unshuffle(pixel_shuffle(y, r), r), y))
            fail("pixel shuffle round trip");
    }

    // split/concat round trip over random widths
    for (int trial = 0; trial < 20; ++trial) {
        const int C = 2 + static_cast<int>(rng() % 30);
        const int keep = 1 + static_cast<int>(rng() % (C - 1));
        const Tensor x = rnd({1, C, 3, 3}, rng());
        const std::vector<Tensor> parts = split(x, 1, {keep, C - keep});
        if (!bitwise_equal(concat(parts, 1), x)) fail("split/concat round trip");
    }

    // softmax rows sum to one
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = rnd({3, 4, 5}, rng(), -8.0, 8.0);
        const Tensor s = softmax(a, -1);
        for (int i = 0; i < 12; ++i) {
            double sum = 0.0;
            for (int j = 0; j < 5; ++j) sum += s.data()[i * 5 + j];
            if (std::fabs(sum - 1.0) > 1e-12) fail("softmax row sum");
        }
    }

    // channel bookkeeping across 100 random valid configurations
    int tested = 0;
    while (tested < 100) {
        ModelConfig cfg;
        cfg.channels = 4 + static_cast<int>(rng() % 61);
        cfg.units = 1 + static_cast<int>(rng() % 4);
        cfg.refined_width = static_cast<int>(rng() % 17);
        cfg.meso = 1 + static_cast<int>(rng() % 8);
        cfg.global = 1 + static_cast<int>(rng() % 8);
        try {
            validate(cfg);
        } catch (const Error&) {
            continue;
        }
        ++tested;
        const std::vector<int> widths = unit_widths(cfg);
        long long reassembled = widths.back();
        for (int i = 0; i + 1 < static_cast<int>(widths.size()); ++i) {
            if (widths[i] - (cfg.refined_width > 0 ? cfg.refined_width : 0) !=
                widths[i + 1])
                fail("unit width chain");
            reassembled += cfg.refined_width;
        }
        if (reassembled != cfg.channels) fail("channel reassembly");
        for (int w : widths)
            if (w < 1) fail("unit width positivity");
    }

    std::ostringstream d;
    if (ok)
        d << "partition/pixel-shuffle/split-concat round trips, softmax row sums, "
          << "channel bookkeeping over " << tested << " random valid configs";
    else
        d << "first broken invariant: " << first_break;
    verdict(7, ok, d.str());
}

void criterion_metric_oracles() {
    Plane a(16, 16), b(16, 16);
    for (int i = 0; i < 256; ++i) a.data[i] = 0.2 + 0.5 * ((i * 7) % 11) / 10.0;
    b = a;
    const bool ident_ok =
        psnr_plane(a, a) == kPsnrPerfect && std::fabs(ssim_plane(a, b) - 1.0) < 1e-9;

    Plane offset = a;
    for (double& v : offset.data) v += 16.0 / 255.0;
    const double p_off = psnr_plane(a, offset);
    const bool off_ok = std::fabs(p_off - kPsnrOffsetTarget) <= kPsnrOffsetTol;

    const bool kernel_ok = std::fabs(cubic_kernel(0.0) - 1.0) < kKernelTol &&
                           std::fabs(cubic_kernel(0.5) - 0.5625) < kKernelTol &&
                           std::fabs(cubic_kernel(1.0)) < kKernelTol;

    std::ostringstream d;
    d << "identical pair -> psnr sentinel/ssim 1.0: " << (ident_ok ? "yes" : "NO")
      << "; 16/255 offset psnr " << fmt(p_off) << " (target " << kPsnrOffsetTarget
      << " +-" << kPsnrOffsetTol << "); cubic kernel at {0,0.5,1} -> {1,0.5625,0}: "
      << (kernel_ok ? "yes" : "NO");
    verdict(8, ident_ok && off_ok && kernel_ok, d.str());
}

void criterion_overfit() {
    const auto t0 = Clock::now();

    ModelConfig cfg;
    cfg.blocks = 2;
    cfg.channels = 16;
    cfg.refined_width = 4;
    cfg.scale = 2;

    // four fixed smooth patches: low-res noise carried up to 32x32 by the
    // cubic resampler, each LR counterpart derived the way training data is
    std::vector<Image> hr_images, lr_images;
    std::vector<Tensor> lr_t, hr_t;
    for (int i = 0; i < 4; ++i) {
        std::mt19937_64 rng(1000 + i);
        std::uniform_real_distribution<double> dist(0.1, 0.9);
        Image seed_img(8, 8);
        for (double& v : seed_img.data) v = dist(rng);
        Image hr = bicubic_resize(seed_img, 32, 32);
        for (double& v : hr.data) v = std::min(1.0, std::max(0.0, v));
        Image lr = bicubic_resize(hr, 16, 16);
        hr_t.push_back(image_to_tensor(hr, Dtype::F32));
        lr_t.push_back(image_to_tensor(lr, Dtype::F32));
        hr_images.push_back(std::move(hr));
        lr_images.push_back(std::move(lr));
    }
    const Tensor lr_batch = concat(lr_t, 0);
    const Tensor hr_batch = concat(hr_t, 0);

    ParamMap params = build_model(cfg, 7, Dtype::F32);
    AdamState state = init_adam(params);
    TrainConfig tc;
    tc.loss = "l2";

    auto train_psnr = [&]() {
        double sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            const Tensor sr = asid_forward(cfg, params, lr_t[i], true);
            const EvalResult r = evaluate_pair(tensor_to_image(sr), hr_images[i], 2);
            sum += r.psnr;
        }
        return sum / 4.0;
    };

    int steps = 0;
    double psnr = train_psnr();
    while (steps < kOverfitMaxSteps && psnr < kOverfitPsnr) {
        for (int i = 0; i < 25 && steps < kOverfitMaxSteps; ++i, ++steps)
            train_step(cfg, params, state, tc, lr_batch, hr_batch, 2e-3);
        psnr = train_psnr();
        if (std::chrono::duration<double>(Clock::now() - t0).count() >
            kOverfitBudgetSec)
            break;
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

    const bool ok = psnr >= kOverfitPsnr && steps <= kOverfitMaxSteps &&
                    secs < kOverfitBudgetSec;
    std::ostringstream d;
    d << "micro model (16 channels, 2 blocks, " << param_element_count(params)
      << " params) reached train psnr " << fmt(psnr) << " dB (target >= "
      << kOverfitPsnr << ") after " << steps << " steps in " << fmt(secs) << "s";
    verdict(9, ok, d.str());
}

void criterion_out_of_scope() {
    verdict(10, true,
            "benchmark-set quality (PSNR/SSIM on standard evaluation corpora and "
            "full accuracy-vs-cost curves) is explicitly NOT reproduced here: it "
            "requires ~1000-epoch training on a large corpus; the structural, "
            "gradient and learning checks above stand in for it");
}

} // namespace

int main() {
    criterion_params();
    criterion_upsampler_deltas();
    criterion_macs();
    criterion_ablation();
    criterion_gradients();
    criterion_sharing_exactness();
    criterion_invariants();
    criterion_metric_oracles();
    criterion_overfit();
    criterion_out_of_scope();
    return failures;
}
