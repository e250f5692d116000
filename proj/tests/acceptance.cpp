// Acceptance checks, one criterion per invocation:  acceptance <n> [--config f] [--cache dir]
// Prints one "criterion <n>: PASS|FAIL ..." line and exits 0 on pass.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "warpres/checkpoint.hpp"
#include "warpres/cli.hpp"
#include "warpres/errors.hpp"
#include "warpres/flowwarp.hpp"
#include "warpres/image_io.hpp"
#include "warpres/latent.hpp"
#include "warpres/losses.hpp"
#include "warpres/metrics.hpp"
#include "warpres/protocols.hpp"
#include "warpres/training.hpp"

using namespace warpres;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kWarpGradRelTol = 1e-4;
constexpr int kWarpGradPositions = 20;
constexpr double kCommuteMaeTol = 0.05;
constexpr int kOracleTrials = 100;
constexpr double kReverseTol = 1e-6;
constexpr int kAffineTriples = 100;
constexpr double kLossTol = 1e-6;
constexpr double kFdSelfTol = 1e-6;
constexpr double kFdGaussTol = 0.05;
constexpr int64_t kFdSamples = 100000;
constexpr double kFdSymTol = 1e-8;
constexpr int kInjectionCodes = 50;
constexpr double kTrainBudgetS = 30 * 60;
constexpr double kAblationBudgetS = 3 * 3600;
constexpr int64_t kAblationIterations = 1000;
constexpr double kPoseStrength = 4.0;
constexpr int64_t kPoseScenes = 64;
constexpr double kProtocolTol = 1e-9;

struct Ctx {
    Config cfg;
    fs::path cache;
};

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

torch::Tensor smooth_texture(int64_t n, int64_t c, int64_t size, uint64_t seed, double freq) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    auto coord = torch::arange(size, torch::kFloat64) / static_cast<double>(size);
    auto y = coord.view({size, 1}), x = coord.view({1, size});
    auto out = torch::zeros({n, c, size, size}, torch::kFloat64);
    for (int k = 0; k < 4; ++k) {
        auto p = torch::rand({n, c, 3}, gen, torch::kFloat64);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < c; ++j) {
                const double fx = freq * p[i][j][0].item<double>(), fy = freq * p[i][j][1].item<double>();
                out[i][j] += 0.25 * torch::sin(2 * M_PI * (fx * x + fy * y) + 2 * M_PI * p[i][j][2].item<double>());
            }
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome warp_checks(Ctx&) {
    Outcome o;
    torch::manual_seed(1);
    auto f = torch::randn({2, 4, 16, 16}, torch::kFloat64);
    o.expect(torch::equal(warp(f, torch::zeros({2, 2, 16, 16}, torch::kFloat64)), f), "zero flow identity");

    auto shift = torch::zeros({2, 2, 16, 16}, torch::kFloat64);
    shift.select(1, 0).fill_(2.0);
    shift.select(1, 1).fill_(-1.0);
    auto moved = warp(f, shift);
    o.expect(torch::equal(moved.slice(2, 1, 16).slice(3, 0, 14), f.slice(2, 0, 15).slice(3, 2, 16)), "integer shift");

    auto feat = torch::randn({1, 3, 12, 12}, torch::kFloat64).requires_grad_(true);
    auto flow = (torch::rand({1, 2, 12, 12}, torch::kFloat64) * 0.6 + 0.2 + torch::randint(-2, 3, {1, 2, 12, 12}))
                    .to(torch::kFloat64)
                    .requires_grad_(true);
    auto weight = torch::randn({1, 3, 12, 12}, torch::kFloat64);
    auto objective = [&](const torch::Tensor& a, const torch::Tensor& b) { return (warp(a, b) * weight).sum(); };
    auto grads = torch::autograd::grad({objective(feat, flow)}, {feat, flow});
    std::mt19937 rng(3);
    double worst = 0.0;
    for (int t = 0; t < kWarpGradPositions; ++t) {
        for (int which = 0; which < 2; ++which) {
            auto base = which == 0 ? feat.detach() : flow.detach();
            std::uniform_int_distribution<int64_t> pick(0, base.numel() - 1);
            const int64_t i = pick(rng);
            const double eps = 1e-6;
            auto up = base.clone(), down = base.clone();
            up.view({-1})[i] += eps;
            down.view({-1})[i] -= eps;
            const double fu = which == 0 ? objective(up, flow.detach()).item<double>()
                                         : objective(feat.detach(), up).item<double>();
            const double fd = which == 0 ? objective(down, flow.detach()).item<double>()
                                         : objective(feat.detach(), down).item<double>();
            const double numeric = (fu - fd) / (2 * eps);
            const double analytic = grads[which].view({-1})[i].item<double>();
            worst = std::max(worst, std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric)));
        }
    }
    o.detail << "grad rel err " << worst;
    o.expect(worst < kWarpGradRelTol, "gradient vs finite differences");
    return o;
}

Outcome rescale_checks(Ctx&) {
    Outcome o;
    auto c = torch::empty({1, 2, 256, 256});
    c.select(1, 0).fill_(8.0);
    c.select(1, 1).fill_(-4.0);
    auto small = rescale_flow({c}, 64).data;
    auto expect = torch::empty({1, 2, 64, 64});
    expect.select(1, 0).fill_(2.0);
    expect.select(1, 1).fill_(-1.0);
    o.expect(torch::equal(small, expect), "constant field / 4");

    // warp at 256 then downsample vs downsample then warp with the rescaled flow
    auto img = smooth_texture(1, 3, 256, 5, 2.0).to(torch::kFloat32);
    auto fl = (smooth_texture(1, 2, 256, 6, 1.0) * 12.0).to(torch::kFloat32);
    auto down = [](const torch::Tensor& t) { return torch::avg_pool2d(t, {4, 4}); };
    auto a = down(warp(img, fl));
    auto b = warp(down(img), rescale_flow({fl}, 64).data);
    // ignore a border band where samples leave the image
    const double mae = (a - b).slice(2, 6, 58).slice(3, 6, 58).abs().mean().item<double>();
    o.detail << "commutation mae " << mae;
    o.expect(mae < kCommuteMaeTol, "warp/downsample commutation");
    return o;
}

Outcome oracle_checks(Ctx& ctx) {
    Outcome o;
    std::mt19937 rng(11);
    const int64_t r = ctx.cfg.oracle.search_radius;
    std::uniform_int_distribution<int64_t> d(-r, r);
    int recovered = 0;
    for (int t = 0; t < kOracleTrials; ++t) {
        auto gen = at::make_generator<at::CPUGeneratorImpl>(1000 + t);
        auto base = torch::rand({1, 3, 16, 16}, gen) * 2 - 1;
        auto img = torch::upsample_bilinear2d(base, {64, 64}, false);
        const int64_t dx = d(rng), dy = d(rng);
        auto moved = torch::roll(img, {dy, dx}, {2, 3});
        auto f = pseudo_gt_flow(img, moved, ctx.cfg.oracle).data;
        const int64_t m = r + ctx.cfg.oracle.block_size;
        auto in = f.slice(2, m, 64 - m).slice(3, m, 64 - m);
        const bool ok = torch::equal(in.select(1, 0), torch::full_like(in.select(1, 0), static_cast<double>(dx))) &&
                        torch::equal(in.select(1, 1), torch::full_like(in.select(1, 1), static_cast<double>(dy)));
        recovered += ok ? 1 : 0;
    }
    o.detail << recovered << "/" << kOracleTrials << " translations recovered";
    o.expect(recovered == kOracleTrials, "all translations");
    return o;
}

Outcome latent_checks(Ctx&) {
    Outcome o;
    torch::manual_seed(4);
    double rev = 0.0, aff = 0.0;
    bool endpoints = true;
    for (int t = 0; t < kAffineTriples; ++t) {
        LatentCode w{torch::randn({8, 64})}, wr{torch::randn({8, 64})};
        endpoints = endpoints && torch::equal(simulate_edit(w, wr, 0.0).codes, w.codes) &&
                    torch::equal(simulate_edit(w, wr, 1.0).codes, wr.codes);
        const double a = torch::rand({1}).item<double>(), b = torch::rand({1}).item<double>();
        auto wa = simulate_edit(w, wr, a);
        rev = std::max(rev, (reverse_edit(wa, LatentCode{wr.codes - w.codes}, a).codes - w.codes).abs().max().item<double>());
        // affine in alpha: the image of a convex combination of alphas is that combination of images
        const double lam = torch::rand({1}).item<double>();
        auto lhs = simulate_edit(w, wr, lam * a + (1 - lam) * b).codes;
        auto rhs = lam * wa.codes + (1 - lam) * simulate_edit(w, wr, b).codes;
        aff = std::max(aff, (lhs - rhs).abs().max().item<double>());
    }
    o.detail << "reverse err " << rev << " affine err " << aff;
    o.expect(endpoints, "exact endpoints");
    o.expect(rev < kReverseTol, "reverse_edit");
    o.expect(aff < kReverseTol, "affinity");
    return o;
}

Outcome loss_checks(Ctx&) {
    Outcome o;
    torch::manual_seed(5);
    auto x = torch::randn({2, 3, 8, 8});
    IdentityExtractor phi;
    o.expect(loss_rec_l2(x, x, x).item<double>() == 0.0, "pixel fixed point");
    o.expect(loss_perceptual(x, x, x, phi).item<double>() == 0.0, "perceptual fixed point");
    o.expect(loss_flow({x.slice(1, 0, 2)}, {x.slice(1, 0, 2)}).item<double>() == 0.0, "flow fixed point");
    o.expect(loss_feature_reg({torch::zeros({3, 3})}).item<double>() == 0.0, "feature fixed point");

    auto t = torch::zeros({1, 1, 2, 2}), a = torch::zeros({1, 1, 2, 2}), b = torch::zeros({1, 1, 2, 2});
    a[0][0][0][0] = 3.0;
    a[0][0][1][1] = 4.0;
    b.fill_(0.5);
    o.expect(std::abs(loss_rec_l2(a, b, t).item<double>() - 6.0) < kLossTol, "pixel example 5 + 1");
    auto adv = loss_adversarial(torch::tensor({0.8}), torch::tensor({0.25}), torch::tensor({0.5}));
    const double obj = 2 * std::log(0.8) + std::log(0.75) + std::log(0.5);
    o.expect(std::abs(adv.objective.item<double>() - obj) < kLossTol, "adversarial objective");
    o.expect(std::abs(adv.loss_g.item<double>() + std::log(0.25) + std::log(0.5)) < kLossTol, "adversarial G");
    auto pred = torch::zeros({1, 2, 1, 2});
    pred[0][0][0][1] = 2.0;
    pred[0][1][0][0] = -1.0;
    o.expect(std::abs(loss_flow({pred}, {torch::zeros({1, 2, 1, 2})}).item<double>() - 0.75) < kLossTol, "flow example");
    o.expect(std::abs(loss_feature_reg({torch::tensor({1.0, -2.5})}).item<double>() - 3.5) < kLossTol, "L1 example");

    o.expect(LossWeights::face_no_edit() == LossWeights{0.1, 1.0, 0.001, 0.1, 3.0, 1.0}, "face no-edit preset");
    o.expect(LossWeights::face_cycle() == LossWeights{0.1, 0.0, 0.0001, 0.01, 3.0, 1.0}, "face cycle preset");
    o.expect(LossWeights::car_no_edit() == LossWeights{0.1, 1.0, 0.001, 0.5, 3.0, 1.0}, "car no-edit preset");
    o.expect(LossWeights::car_cycle() == LossWeights{0.1, 0.0, 0.0001, 0.05, 3.0, 1.0}, "car cycle preset");
    o.detail << "fixed points, examples and presets";
    return o;
}

Outcome fd_checks(Ctx&) {
    Outcome o;
    auto draw = [](int64_t n, int64_t d, uint64_t seed) {
        auto g = at::make_generator<at::CPUGeneratorImpl>(seed);
        return torch::randn({n, d}, g, torch::kFloat64);
    };
    auto x = draw(2000, 16, 1);
    const double self = frechet_distance(x, x);
    // N(0, I) against N(mu, I) with |mu| = 1: FD = 1
    auto a = draw(kFdSamples, 4, 2), b = draw(kFdSamples, 4, 3) + 0.5;
    const double g = frechet_distance(a, b);
    auto p = draw(300, 8, 4), q = draw(300, 8, 5) * 1.7 - 0.2;
    const double sym = std::abs(frechet_distance(p, q) - frechet_distance(q, p));
    o.detail << "self " << self << " gaussian " << g << " asym " << sym;
    o.expect(self < kFdSelfTol, "fd(X, X)");
    o.expect(std::abs(g - 1.0) < kFdGaussTol, "Gaussian reference");
    o.expect(sym < kFdSymTol, "symmetry");
    return o;
}

Outcome injection_checks(Ctx& ctx) {
    Outcome o;
    int exact = 0, total = 0;
    for (auto sub : {Substrate::Procedural, Substrate::Gan}) {
        ModelConfig m = ctx.cfg.model;
        m.substrate = sub;
        auto g = make_generator(m, ctx.cfg.seed);
        torch::NoGradGuard no_grad;
        for (int i = 0; i < kInjectionCodes; ++i) {
            auto w = g->mapping()->map(sample_z(static_cast<uint64_t>(i), m.z_dim).z);
            auto zero = torch::zeros({1, m.injection_channels(), m.injection_resolution(), m.injection_resolution()});
            exact += torch::equal(g->synthesize_with_injection(w, {zero, Resolution::R64}), g->synthesize(w).image);
            ++total;
        }
    }
    o.detail << exact << "/" << total << " codes bit-exact";
    o.expect(exact == total, "zero injection");
    return o;
}

// ---------------------------------------------------------------------------

/// Generator and E0 for the configured model, built once per cache directory.
Config with_cached_bundle(Ctx& ctx) {
    Config cfg = ctx.cfg;
    fs::create_directories(ctx.cache);
    const auto gen_path = (ctx.cache / "generator.wrck").string(), e0_path = (ctx.cache / "e0.wrck").string();
    if (!fs::exists(gen_path)) {
        auto r = pretrain_generator(cfg, gen_path);
        if (!r.passed) throw Error("generator pretraining failed its FD check");
    }
    cfg.paths.generator = gen_path;
    if (!fs::exists(e0_path)) train_e0(cfg, e0_path);
    cfg.paths.e0 = e0_path;
    return cfg;
}

std::vector<double> logged_totals(const fs::path& log) {
    std::vector<double> out;
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line).at("total").get<double>());
    return out;
}

Outcome training_run(Ctx& ctx) {
    Outcome o;
    Config cfg = with_cached_bundle(ctx);
    const fs::path dir = ctx.cache / "run8";
    fs::remove_all(dir);
    const auto t0 = std::chrono::steady_clock::now();
    auto s = train(cfg, TrainOptions{dir.string(), "", std::nullopt, nullptr});
    const double secs = seconds_since(t0);
    bool finite = true;
    for (double v : logged_totals(dir / "log.jsonl")) finite = finite && std::isfinite(v);
    o.detail << s.steps << " steps in " << secs << " s, loss " << s.loss_head << " -> " << s.loss_tail << ", epe "
             << s.epe_start << " -> " << s.epe_end;
    o.expect(s.steps == cfg.schedule.iterations, "step count");
    o.expect(finite, "finite losses");
    o.expect(s.loss_tail < s.loss_head, "total loss decreasing");
    o.expect(s.epe_end < s.epe_start, "EPE lower at the end");
    o.expect(secs < kTrainBudgetS, "time budget");
    return o;
}

struct AblationResult {
    double pose_mse = 0.0, id = 0.0, seconds = 0.0;
};

AblationResult ablation_run(Ctx& ctx, const Config& base, const std::string& variant, uint64_t seed) {
    Config cfg = base;
    cfg.seed = seed;
    cfg.schedule.iterations = kAblationIterations;
    cfg.schedule.milestones = {kAblationIterations * 6 / 10, kAblationIterations * 85 / 100};
    cfg.schedule.epe_every = 0;
    cfg.schedule.checkpoint_every = 0;
    if (variant == "no_warp") cfg.ablation.warp_mode = WarpMode::None;
    if (variant == "flow_off") {
        cfg.lambdas.no_edit.fl = 0.0;
        cfg.lambdas.cycle.fl = 0.0;
    }
    const fs::path dir = ctx.cache / ("run9_" + variant + "_s" + std::to_string(seed));
    const fs::path model_path = dir / "model.wrck", stamp = dir / "seconds.txt";
    AblationResult r;
    if (fs::exists(model_path) && fs::exists(stamp)) {
        std::ifstream(stamp) >> r.seconds;
    } else {
        fs::remove_all(dir);
        const auto t0 = std::chrono::steady_clock::now();
        train(cfg, TrainOptions{dir.string(), "", std::nullopt, nullptr});
        r.seconds = seconds_since(t0);
        std::ofstream(stamp) << r.seconds;
    }
    auto model = WarpResModel::load(model_path.string());
    auto plugins = EvalPlugins::from_bundle(model->bundle);
    auto gen = data_generator(model->bundle);
    ProceduralScenes scenes(gen, cfg.data.marks_per_image);
    auto batch = scenes.sample(0x9051, kPoseScenes);
    for (double s : {kPoseStrength, -kPoseStrength}) {
        auto rep = pose_ground_truth_error(*model, scenes, batch, s, plugins);
        r.pose_mse += 0.5 * rep.extras.at("pose_mse");
        r.id += 0.5 * *rep.id_score;
    }
    return r;
}

Outcome ablation_checks(Ctx& ctx) {
    Outcome o;
    Config base = with_cached_bundle(ctx);
    int pose_wins = 0, id_wins = 0;
    double seconds = 0.0;
    for (uint64_t seed : {1, 2, 3}) {
        auto full = ablation_run(ctx, base, "full", seed);
        auto none = ablation_run(ctx, base, "no_warp", seed);
        auto off = ablation_run(ctx, base, "flow_off", seed);
        seconds += full.seconds + none.seconds + off.seconds;
        const bool pose = full.pose_mse < none.pose_mse && full.pose_mse < off.pose_mse;
        const bool id = full.id > none.id && full.id > off.id;
        pose_wins += pose;
        id_wins += id;
        std::cout << "  seed " << seed << ": pose mse full " << full.pose_mse << " no_warp " << none.pose_mse
                  << " flow_off " << off.pose_mse << " | id full " << full.id << " no_warp " << none.id
                  << " flow_off " << off.id << "\n";
    }
    o.detail << "pose wins " << pose_wins << "/3, id wins " << id_wins << "/3, training " << seconds << " s";
    o.expect(pose_wins == 3, "pose error 3/3");
    o.expect(id_wins >= 2, "id 2/3");
    o.expect(seconds < kAblationBudgetS, "time budget");
    return o;
}

Outcome protocol_checks(Ctx& ctx) {
    Outcome o;
    Config cfg = with_cached_bundle(ctx);
    // a briefly trained model is enough for the invariances checked here
    const fs::path dir = ctx.cache / "run10";
    const fs::path model_path = dir / "model.wrck";
    if (!fs::exists(model_path)) {
        Config short_cfg = cfg;
        short_cfg.schedule.iterations = 20;
        short_cfg.schedule.epe_every = 0;
        short_cfg.schedule.checkpoint_every = 0;
        train(short_cfg, TrainOptions{dir.string(), "", std::nullopt, nullptr});
    }
    auto model = WarpResModel::load(model_path.string());
    auto plugins = EvalPlugins::from_bundle(model->bundle);
    auto gen = data_generator(model->bundle);
    ProceduralScenes scenes(gen, cfg.data.marks_per_image);
    auto ds = scenes.labeled(scenes.sample(0x7e57, cfg.data.eval_size), Split::Test);

    EditDirection zero{torch::zeros({cfg.model.latent_layers, cfg.model.latent_dim}), false, "zero", 1.0F};
    auto rep = eval_edit_attribute(*model, ds, zero, "smile", true, 3.0, plugins);
    auto src = ds.images.index_select(0, torch::tensor(ds.select("smile", false)));
    auto dst = ds.images.index_select(0, torch::tensor(ds.select("smile", true)));
    // float32 convolutions depend on batch size, so feed the same 16-image chunks
    auto in_chunks = [](const torch::Tensor& x, auto fn) {
        torch::NoGradGuard no_grad;
        std::vector<torch::Tensor> parts;
        for (int64_t i = 0; i < x.size(0); i += 16) parts.push_back(fn(x.slice(0, i, std::min(i + 16, x.size(0)))));
        return torch::cat(parts);
    };
    auto embed = [&](const torch::Tensor& c) { return plugins.features->embedding(c); };
    auto recon = in_chunks(src, [&](const torch::Tensor& c) { return model->invert(c); });
    const double direct = frechet_distance(in_chunks(recon, embed), in_chunks(dst, embed));
    o.detail << "zero-direction fid " << *rep.fid << " vs " << direct;
    o.expect(std::abs(*rep.fid - direct) <= kProtocolTol * std::max(1.0, direct), "zero-direction FID");

    // CLI: edit --strength 0 against invert, byte for byte
    const fs::path io = ctx.cache / "cli10";
    fs::remove_all(io);
    fs::create_directories(io);
    save_png(ds.images[0], (io / "in.png").string());
    save_direction(gen->smile_direction(), (io / "smile.dir").string());
    std::ostringstream sink;
    const int a = run_cli({"invert", "--model", model_path.string(), "--input", (io / "in.png").string(), "--out",
                           (io / "inv.png").string()},
                          sink, sink);
    const int b = run_cli({"edit", "--model", model_path.string(), "--input", (io / "in.png").string(), "--direction",
                           (io / "smile.dir").string(), "--strength", "0", "--out", (io / "edit.png").string()},
                          sink, sink);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    o.expect(a == 0 && b == 0, "CLI exit codes");
    o.expect(a == 0 && b == 0 && slurp(io / "inv.png") == slurp(io / "edit.png"), "edit strength 0 == invert");

    torch::manual_seed(10);
    FlowField f{torch::randn({1, 2, 17, 23}) * 5};
    write_flo(f, (io / "f.flo").string());
    auto back = read_flo((io / "f.flo").string());
    o.expect(torch::equal(back.data.view({1, 2, 17, 23}), f.data), ".flo round trip");
    return o;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int criterion = 0;
    std::string config, cache = "acceptance_cache";
    app.add_option("criterion", criterion)->required()->check(CLI::Range(1, 10));
    app.add_option("--config", config, "model config for the training criteria");
    app.add_option("--cache", cache, "directory for pretrained generator, E0 and runs");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome(Ctx&)>>> table{
        {"warp identity, shifts and gradient", warp_checks},
        {"flow rescaling", rescale_checks},
        {"block-matching oracle", oracle_checks},
        {"latent edit algebra", latent_checks},
        {"losses", loss_checks},
        {"Frechet distance", fd_checks},
        {"zero injection", injection_checks},
        {"training run", training_run},
        {"warp ablation", ablation_checks},
        {"protocol invariances and I/O", protocol_checks},
    };
    Ctx ctx;
    ctx.cache = cache;
    try {
        ctx.cfg = config.empty() ? Config{} : load_config(config);
        const auto& [name, fn] = table[static_cast<std::size_t>(criterion - 1)];
        const auto t0 = std::chrono::steady_clock::now();
        auto out = fn(ctx);
        std::cout << "criterion " << criterion << " (" << name << "): " << (out.pass ? "PASS" : "FAIL") << " "
                  << out.detail.str() << " [" << seconds_since(t0) << " s]" << std::endl;
        return out.pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cout << "criterion " << criterion << ": FAIL error: " << e.what() << std::endl;
        return 1;
    }
}
