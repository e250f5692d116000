#include "warpres/training.hpp"

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "warpres/errors.hpp"
#include "warpres/losses.hpp"
#include "warpres/metrics.hpp"

namespace warpres {

namespace fs = std::filesystem;

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double scalar(const torch::Tensor& t) { return t.detach().to(torch::kFloat64).item<double>(); }

void check_finite(const nlohmann::json& record, double value, const std::string& what) {
    if (!std::isfinite(value)) throw DivergenceError(what + " is not finite: " + record.dump());
}

torch::Tensor randn_from(uint64_t seed, std::vector<int64_t> shape) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    return torch::randn(shape, gen);
}

} // namespace

std::string to_string(PathKind p) { return p == PathKind::NoEdit ? "no_edit" : "cycle"; }

double learning_rate(const ScheduleConfig& s, int64_t step) {
    double lr = s.lr;
    for (auto m : s.milestones)
        if (step >= m) lr *= 0.5;
    return lr;
}

// ---------------------------------------------------------------------------

SceneSource::SceneSource(std::shared_ptr<ProceduralGenerator> gen, int64_t marks, uint64_t seed)
    : scenes_(std::move(gen), marks), seed_(seed) {}

uint64_t SceneSource::mix(uint64_t key) const { return splitmix64(seed_ ^ splitmix64(key)); }

torch::Tensor DirectorySource::batch(uint64_t key, int64_t n) {
    std::mt19937_64 rng(splitmix64(seed_ ^ splitmix64(key)));
    std::uniform_int_distribution<int64_t> pick(0, ds_.size() - 1);
    std::vector<int64_t> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = pick(rng);
    return ds_.images.index_select(0, torch::tensor(idx, torch::kInt64));
}

std::shared_ptr<ProceduralGenerator> data_generator(const GeneratorBundle& b) {
    if (auto p = std::dynamic_pointer_cast<ProceduralGenerator>(b.gen)) return p;
    ModelConfig m = b.model;
    m.substrate = Substrate::Procedural;
    auto g = std::make_shared<ProceduralGenerator>(m, b.seed);
    g->freeze();
    return g;
}

std::unique_ptr<ImageSource> make_image_source(const Config& cfg, const GeneratorBundle& b) {
    if (!cfg.data.manifest.empty())
        return std::make_unique<DirectorySource>(load_dataset_dir(cfg.data.manifest, Split::Train), cfg.seed);
    return std::make_unique<SceneSource>(data_generator(b), cfg.data.marks_per_image, cfg.seed);
}

nlohmann::json StepRecord::to_json() const {
    nlohmann::json j{{"step", step},   {"path", warpres::to_string(path)},
                     {"lr", lr},       {"adv", adv},
                     {"perc", perc},   {"id", id},
                     {"feat", feat},   {"flow", flow},
                     {"total", total}, {"loss_d", loss_d},
                     {"oracle", oracle_used}};
    j["rec"] = rec ? nlohmann::json(*rec) : nlohmann::json(nullptr);
    if (epe) j["epe"] = *epe;
    return j;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const Config& cfg, WarpResModel& model, ImageSource& data)
    : cfg_(cfg), model_(model), data_(data), rng_(splitmix64(cfg.seed ^ 0x7472616e)) {
    opt_ = std::make_unique<torch::optim::Adam>(model_.trainable_parameters(),
                                                torch::optim::AdamOptions(cfg.schedule.lr));
    opt_d_ = std::make_unique<torch::optim::Adam>(model_.disc->parameters(), torch::optim::AdamOptions(cfg.schedule.lr));
}

void Trainer::set_lr(double lr) {
    for (auto* opt : {opt_.get(), opt_d_.get()})
        for (auto& g : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
}

LatentCode Trainer::sample_w_r(int64_t n) {
    torch::NoGradGuard no_grad;
    std::normal_distribution<float> normal(0.0F, 1.0F);
    auto z = torch::empty({n, model_.model.z_dim});
    auto* p = z.data_ptr<float>();
    for (int64_t i = 0; i < z.numel(); ++i) p[i] = normal(rng_);
    return model_.gen().mapping()->map(z);
}

StepRecord Trainer::step() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const PathKind path = unit(rng_) < cfg_.schedule.edit_probability ? PathKind::CycleTranslation : PathKind::NoEdit;
    auto x = data_.batch(static_cast<uint64_t>(step_), cfg_.data.batch_size);
    return train_step(x, path);
}

StepRecord Trainer::train_step(const torch::Tensor& x, PathKind path) {
    const double lr = learning_rate(cfg_.schedule, step_);
    set_lr(lr);
    const int64_t n = x.size(0);
    const auto& lam = path == PathKind::NoEdit ? cfg_.lambdas.no_edit : cfg_.lambdas.cycle;
    const bool train_flow = model_.warp_mode == WarpMode::Predicted && lam.fl > 0.0;

    StepRecord rec;
    rec.step = step_;
    rec.path = path;
    rec.lr = lr;
    auto w_r = sample_w_r(n);

    torch::Tensor out, fake_a, fake_b, flow_loss;
    std::vector<torch::Tensor> residuals;
    if (path == PathKind::NoEdit) {
        auto res = model_.forward_pipeline(x, torch::zeros({n}), w_r, false);
        out = res.image_out;
        fake_a = fake_b = out;
        residuals.push_back(res.f);
        // Identical codes: the oracle target is the zero field.
        if (train_flow) flow_loss = loss_flow(res.flow_pred, {torch::zeros_like(res.flow_pred.data)});
    } else {
        std::vector<float> a(static_cast<std::size_t>(n));
        for (auto& v : a) v = static_cast<float>(sample_edit_alpha(rng_, 1.0));
        auto alpha = torch::tensor(a);
        auto res = model_.forward_pipeline(x, alpha, w_r, train_flow);
        auto x_i = res.image_out;
        auto enc = model_.e0->encode(x_i);
        const LatentCode dir{w_r.codes - res.w.codes};
        auto w_back = reverse_edit(enc.w, dir, alpha);
        auto back = model_.run_pass(enc.f0.data, enc.w, w_back, false);
        out = back.image;
        fake_a = out;
        fake_b = x_i;
        residuals = {res.f, back.f};
        if (train_flow) {
            flow_loss = 0.5 * (loss_flow(res.flow_pred, *res.flow_gt) + loss_flow(back.flow, model_.flow_target(back)));
            rec.oracle_used = true;
        }
    }

    auto logits = model_.disc->run(torch::cat({x, fake_a, fake_b})).logit.split(n);
    auto adv = loss_adversarial_logits(logits[0], logits[1], logits[2]);
    auto total = lam.a * adv.loss_g;
    rec.adv = scalar(adv.loss_g);
    if (lam.r1 > 0.0) {
        auto l2 = loss_rec_l2(out, x, x);
        total = total + lam.r1 * l2;
        rec.rec = scalar(l2);
    }
    auto perc = loss_perceptual(out, x, x, *model_.phi);
    auto ident = loss_identity(out, x, x, *model_.bundle.embedder);
    auto feat = loss_feature_reg_mean(residuals);
    total = total + lam.r2 * perc + lam.r3 * ident + lam.f * feat;
    rec.perc = scalar(perc);
    rec.id = scalar(ident);
    rec.feat = scalar(feat);
    if (flow_loss.defined()) {
        total = total + lam.fl * flow_loss;
        rec.flow = scalar(flow_loss);
    }
    rec.total = scalar(total);
    check_finite(rec.to_json(), rec.total, "training loss");

    opt_->zero_grad();
    total.backward();
    audit_frozen_gradients();
    opt_->step();

    opt_d_->zero_grad();
    auto dl = model_.disc->run(torch::cat({x, fake_a.detach(), fake_b.detach()})).logit.split(n);
    auto d_terms = loss_adversarial_logits(dl[0], dl[1], dl[2]);
    d_terms.loss_d.backward();
    opt_d_->step();
    rec.loss_d = scalar(d_terms.loss_d);
    check_finite(rec.to_json(), rec.loss_d, "discriminator loss");

    ++step_;
    return rec;
}

void Trainer::audit_frozen_gradients() const {
    auto check = [](const torch::nn::Module& m, const char* name) {
        for (const auto& p : m.parameters(true))
            if (p.grad().defined() && p.grad().abs().max().item<double>() != 0.0)
                throw Error(std::string("gradient audit: frozen ") + name + " parameter received a gradient");
    };
    check(*model_.bundle.gen, "generator");
    check(*model_.e0, "E0");
}

double Trainer::probe_epe() {
    torch::NoGradGuard no_grad;
    if (!probe_) {
        const int64_t n = cfg_.data.probe_size;
        auto& g = model_.gen();
        auto w = g.mapping()->map(randn_from(cfg_.data.probe_seed, {n, model_.model.z_dim}));
        auto w_r = g.mapping()->map(randn_from(cfg_.data.probe_seed + 1, {n, model_.model.z_dim}));
        auto w_a = simulate_edit(w, w_r, 0.45);
        Probe p;
        PassOutput pass;
        pass.taps_g = g.synthesize(w);
        pass.taps_e = g.synthesize(w_a);
        p.taps_g = pass.taps_g.taps;
        p.taps_e = pass.taps_e.taps;
        p.target = model_.flow_target(pass);
        probe_ = p;
    }
    auto pred = model_.flow->forward(probe_->taps_g, probe_->taps_e);
    return endpoint_error(pred, probe_->target);
}

void Trainer::save(const std::string& path) const {
    Checkpoint ck;
    model_.store(ck);
    ck.put_adam("opt", *opt_);
    ck.put_adam("opt_d", *opt_d_);
    std::ostringstream rng;
    rng << rng_;
    ck.manifest["trainer"] = {{"step", step_}, {"rng", rng.str()}, {"config", to_json(cfg_)}};
    ck.save(path);
}

void Trainer::resume(const std::string& path) {
    auto ck = Checkpoint::load(path);
    if (!ck.manifest.contains("trainer")) throw FormatError(path + " is not a trainer checkpoint");
    model_.restore(ck);
    ck.load_adam("opt", *opt_);
    ck.load_adam("opt_d", *opt_d_);
    step_ = ck.manifest["trainer"].at("step").get<int64_t>();
    std::istringstream rng(ck.manifest["trainer"].at("rng").get<std::string>());
    rng >> rng_;
    if (!rng) throw FormatError("corrupt RNG state in " + path);
}

// ---------------------------------------------------------------------------

TrainSummary train(const Config& cfg, const TrainOptions& opts) {
    auto gen_ck = Checkpoint::load(cfg.paths.generator);
    auto bundle = load_generator_bundle(gen_ck);
    auto e0_ck = Checkpoint::load(cfg.paths.e0);
    auto e0 = load_base_encoder(e0_ck, bundle.model);
    WarpResModel model(cfg, std::move(bundle), std::move(e0));
    auto data = make_image_source(cfg, model.bundle);
    Trainer trainer(cfg, model, *data);
    if (!opts.resume.empty()) trainer.resume(opts.resume);

    fs::create_directories(opts.out_dir);
    std::ofstream log(fs::path(opts.out_dir) / "log.jsonl", opts.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot write training log in " + opts.out_dir);

    const int64_t iterations = opts.iterations.value_or(cfg.schedule.iterations);
    TrainSummary summary;
    summary.epe_start = trainer.probe_epe();
    std::vector<double> head;
    std::deque<double> tail;
    while (trainer.current_step() < iterations) {
        auto r = trainer.step();
        const int64_t done = trainer.current_step();
        if (cfg.schedule.epe_every > 0 && done % cfg.schedule.epe_every == 0) r.epe = trainer.probe_epe();
        if (head.size() < 100) head.push_back(r.total);
        tail.push_back(r.total);
        if (tail.size() > 100) tail.pop_front();
        if (r.step % std::max<int64_t>(1, cfg.schedule.log_every) == 0 || r.epe || done == iterations) {
            log << r.to_json().dump() << '\n';
            log.flush();
            if (opts.console != nullptr)
                *opts.console << "step " << r.step << " " << to_string(r.path) << " total " << r.total
                              << (r.epe ? " epe " + std::to_string(*r.epe) : std::string()) << '\n';
        }
        if (cfg.schedule.checkpoint_every > 0 && done % cfg.schedule.checkpoint_every == 0)
            trainer.save((fs::path(opts.out_dir) / "trainer.wrck").string());
    }
    summary.steps = trainer.current_step();
    summary.epe_end = trainer.probe_epe();
    auto mean = [](const auto& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    summary.loss_head = mean(head);
    summary.loss_tail = mean(tail);
    trainer.save((fs::path(opts.out_dir) / "trainer.wrck").string());

    Checkpoint out;
    model.store(out);
    out.manifest["train"] = {{"steps", summary.steps},
                             {"epe_start", summary.epe_start},
                             {"epe_end", summary.epe_end},
                             {"config", to_json(cfg)}};
    const std::string path = cfg.paths.model.empty() ? (fs::path(opts.out_dir) / "model.wrck").string() : cfg.paths.model;
    out.save(path);
    return summary;
}

// ---------------------------------------------------------------------------

nlohmann::json PretrainReport::to_json() const {
    return {{"fd", fd},           {"threshold", threshold},     {"passed", passed},
            {"real_score", real_score}, {"noise_score", noise_score}, {"steps", steps}};
}

PretrainReport pretrain_generator(const Config& cfg, const std::string& out_path, std::ostream* console) {
    const auto& s = cfg.schedule;
    GeneratorBundle b;
    b.model = cfg.model;
    b.seed = cfg.seed;
    b.embedder_seed = splitmix64(cfg.seed ^ 0x656d62);
    b.gen = make_generator(cfg.model, cfg.seed);
    SceneSource data(data_generator(b), cfg.data.marks_per_image, splitmix64(cfg.seed ^ 0x70726574));
    torch::manual_seed(splitmix64(cfg.seed ^ 0x64697363));
    b.disc = Discriminator(cfg.model);
    torch::optim::Adam opt_d(b.disc->parameters(), torch::optim::AdamOptions(2e-4).betas({0.5, 0.999}));
    namespace F = torch::nn::functional;
    const int64_t batch = cfg.data.batch_size;
    auto noise = [&](uint64_t key, int64_t n) {
        return randn_from(splitmix64(cfg.seed ^ key ^ 0x6e6f), {n, 3, cfg.model.image_size, cfg.model.image_size})
            .clamp(-1.0, 1.0);
    };

    PretrainReport report;
    if (cfg.model.substrate == Substrate::Procedural) {
        // The analytic generator needs no training; the discriminator learns
        // what real scenes look like against noise.
        b.gen->freeze();
        for (int64_t i = 0; i < s.disc_warmup_steps; ++i) {
            auto real = data.batch(static_cast<uint64_t>(i), batch);
            auto logits = b.disc->run(torch::cat({real, noise(static_cast<uint64_t>(i), batch)})).logit.split(batch);
            auto loss = (F::softplus(-logits[0]) + F::softplus(logits[1])).mean();
            const double v = scalar(loss);
            if (!std::isfinite(v)) throw DivergenceError("discriminator warm-up diverged at step " + std::to_string(i));
            opt_d.zero_grad();
            loss.backward();
            opt_d.step();
            if (console != nullptr && i % std::max<int64_t>(1, s.log_every) == 0)
                *console << "warmup " << i << " d_loss " << v << '\n';
        }
        report.steps = s.disc_warmup_steps;
    } else {
        std::vector<torch::Tensor> g_params;
        for (auto& p : b.gen->named_parameters(true))
            if (p.key().rfind("mapping.", 0) != 0) g_params.push_back(p.value());
        torch::optim::Adam opt_g(g_params, torch::optim::AdamOptions(2e-4).betas({0.5, 0.99}));
        for (int64_t i = 0; i < s.gan_steps; ++i) {
            auto real = data.batch(static_cast<uint64_t>(i), batch);
            auto w = b.gen->mapping()->map(randn_from(splitmix64(cfg.seed ^ 0x67616e ^ static_cast<uint64_t>(i)),
                                                      {batch, cfg.model.z_dim}));
            auto fake = b.gen->synthesize(w).image;
            auto dl = b.disc->run(torch::cat({real, fake.detach()})).logit.split(batch);
            auto loss_d = (F::softplus(-dl[0]) + F::softplus(dl[1])).mean();
            opt_d.zero_grad();
            loss_d.backward();
            opt_d.step();
            auto loss_g = F::softplus(-b.disc->run(fake).logit).mean();
            opt_g.zero_grad();
            loss_g.backward();
            opt_g.step();
            const double vd = scalar(loss_d), vg = scalar(loss_g);
            if (!std::isfinite(vd) || !std::isfinite(vg))
                throw DivergenceError("generator pretraining diverged at step " + std::to_string(i) +
                                      ": d_loss=" + std::to_string(vd) + " g_loss=" + std::to_string(vg));
            if (console != nullptr && i % std::max<int64_t>(1, s.log_every) == 0)
                *console << "gan " << i << " d_loss " << vd << " g_loss " << vg << '\n';
        }
        b.gen->freeze();
        report.steps = s.gan_steps;
    }
    b.gen->eval();
    b.disc->eval();

    {
        torch::NoGradGuard no_grad;
        const int64_t n = 256;
        auto real = data.batch(1ULL << 40, n);
        auto w = b.gen->mapping()->map(randn_from(splitmix64(cfg.seed ^ 0x6664), {n, cfg.model.z_dim}));
        auto fake = b.gen->synthesize(w).image;
        report.fd = frechet_distance(b.disc->run(real).penultimate, b.disc->run(fake).penultimate);
        report.real_score = b.disc->discriminate(real).mean().item<double>();
        report.noise_score = b.disc->discriminate(noise(1ULL << 41, n)).mean().item<double>();
    }
    report.threshold = s.fd_threshold;
    report.passed = report.fd < s.fd_threshold;
    b.pretrain = report.to_json();
    b.embedder = make_identity_embedder(b.model, b.embedder_seed);

    Checkpoint ck;
    store_generator_bundle(ck, b);
    ck.manifest["kind"] = "generator";
    ck.save(out_path);
    return report;
}

// ---------------------------------------------------------------------------

double e0_center_error(BaseEncoder& e0, ProceduralGenerator& gen, const SceneBatch& s) {
    torch::NoGradGuard no_grad;
    auto w = e0->encode(s.images).w;
    auto d = gen.blob_centers(w) - gen.blob_centers(s.w);
    return d.pow(2).sum(2).sqrt().mean().item<double>();
}

E0Report train_e0(const Config& cfg, const std::string& out_path, std::ostream* console) {
    auto ck = Checkpoint::load(cfg.paths.generator);
    auto bundle = load_generator_bundle(ck);
    auto proc = std::dynamic_pointer_cast<ProceduralGenerator>(bundle.gen);
    std::unique_ptr<SceneSource> scenes;
    if (proc) scenes = std::make_unique<SceneSource>(proc, cfg.data.marks_per_image, splitmix64(cfg.seed ^ 0x6530));

    torch::manual_seed(splitmix64(cfg.seed ^ 0x65306e6574));
    BaseEncoder e0(bundle.model);
    const auto& s = cfg.schedule;
    torch::optim::Adam opt(e0->parameters(), torch::optim::AdamOptions(s.e0_lr));
    E0Report report;
    for (int64_t i = 0; i < s.e0_steps; ++i) {
        double lr = s.e0_lr;
        if (i >= s.e0_steps * 6 / 10) lr *= 0.3;
        if (i >= s.e0_steps * 85 / 100) lr *= 0.3;
        for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
        torch::Tensor x, w;
        if (scenes) {
            auto b = scenes->scenes(static_cast<uint64_t>(i), s.e0_batch);
            x = b.images;
            w = b.w.codes;
        } else {
            torch::NoGradGuard no_grad;
            w = bundle.gen->mapping()
                    ->map(randn_from(splitmix64(cfg.seed ^ 0x6530 ^ static_cast<uint64_t>(i)),
                                     {s.e0_batch, bundle.model.z_dim}))
                    .codes;
            x = bundle.gen->synthesize({w}).image;
        }
        auto loss = torch::mse_loss(e0->encode(x).w.codes, w);
        report.final_loss = scalar(loss);
        if (!std::isfinite(report.final_loss)) throw DivergenceError("E0 training diverged at step " + std::to_string(i));
        opt.zero_grad();
        loss.backward();
        opt.step();
        if (console != nullptr && i % std::max<int64_t>(1, s.log_every) == 0)
            *console << "e0 " << i << " loss " << report.final_loss << '\n';
    }
    freeze_module(*e0);
    e0->eval();
    if (scenes) report.center_error_px = e0_center_error(e0, *proc, scenes->scenes(1ULL << 40, 64));

    ck.put_module("e0", *e0);
    ck.manifest["e0"] = {{"final_loss", report.final_loss}, {"center_error_px", report.center_error_px}};
    ck.save(out_path);
    return report;
}

} // namespace warpres
