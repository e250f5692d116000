#include "warpres/pipeline.hpp"

#include "warpres/errors.hpp"

namespace warpres {

namespace {

Discriminator copy_discriminator(const ModelConfig& cfg, const Discriminator& src) {
    Checkpoint tmp;
    tmp.put_module("d", *src);
    Discriminator d(cfg);
    tmp.load_module("d", *d);
    return d;
}

} // namespace

void store_generator_bundle(Checkpoint& ck, const GeneratorBundle& b) {
    ck.manifest["model"] = model_to_json(b.model);
    ck.manifest["generator"] = {{"seed", b.seed}, {"embedder_seed", b.embedder_seed}, {"pretrain", b.pretrain}};
    ck.put_module("generator", *b.gen);
    ck.put_module("disc", *b.disc);
}

GeneratorBundle load_generator_bundle(const Checkpoint& ck) {
    if (!ck.manifest.contains("model") || !ck.manifest.contains("generator"))
        throw FormatError("checkpoint does not contain a generator");
    GeneratorBundle b;
    b.model = model_from_json(ck.manifest["model"]);
    const auto& g = ck.manifest["generator"];
    b.seed = g.at("seed").get<uint64_t>();
    b.embedder_seed = g.at("embedder_seed").get<uint64_t>();
    b.pretrain = g.value("pretrain", nlohmann::json::object());
    b.gen = make_generator(b.model, b.seed);
    ck.load_module("generator", *b.gen);
    b.gen->freeze();
    b.gen->eval();
    b.disc = Discriminator(b.model);
    ck.load_module("disc", *b.disc);
    freeze_module(*b.disc);
    b.disc->eval();
    b.embedder = make_identity_embedder(b.model, b.embedder_seed);
    return b;
}

BaseEncoder load_base_encoder(const Checkpoint& ck, const ModelConfig& model) {
    BaseEncoder e0(model);
    ck.load_module("e0", *e0);
    freeze_module(*e0);
    e0->eval();
    return e0;
}

WarpResModel::WarpResModel(const Config& cfg, GeneratorBundle b, BaseEncoder enc)
    : model(b.model), warp_mode(cfg.ablation.warp_mode), oracle(cfg.oracle), bundle(std::move(b)), e0(std::move(enc)) {
    torch::manual_seed(cfg.seed);
    e1 = ResidualDetector(model);
    e2 = Refiner(model);
    {
        // Start close to a W+-only reconstruction.
        torch::NoGradGuard no_grad;
        e2->out_conv()->weight.mul_(0.1);
        e2->out_conv()->bias.zero_();
    }
    flow = FlowNet(model);
    disc = copy_discriminator(model, bundle.disc);
    auto frozen = copy_discriminator(model, bundle.disc);
    freeze_module(*frozen);
    frozen->eval();
    phi = std::make_shared<DiscriminatorFeatures>(frozen);
    freeze_module(*e0);
}

FlowField WarpResModel::predict(const PassOutput& p) {
    const int64_t r = model.injection_resolution();
    switch (warp_mode) {
    case WarpMode::Predicted: return flow->forward(p.taps_g.taps, p.taps_e.taps);
    case WarpMode::None:
        return {torch::zeros({p.f_a.size(0), 2, r, r}, p.f_a.options())};
    case WarpMode::Oracle: {
        auto f = flow_target(p);
        return {f.data.to(p.f_a.dtype())};
    }
    }
    throw Error("unknown warp mode");
}

FlowField WarpResModel::flow_target(const PassOutput& p) const {
    auto gt = pseudo_gt_flow(p.taps_e.image, p.taps_g.image, oracle);
    return rescale_flow(gt, model.injection_resolution());
}

PassOutput WarpResModel::run_pass(const torch::Tensor& f0, const LatentCode& w_src, const LatentCode& w_dst,
                                  bool same_codes) {
    PassOutput p;
    p.w_src = w_src;
    p.w_dst = w_dst;
    p.taps_g = gen().synthesize(w_src);
    p.taps_e = same_codes ? p.taps_g : gen().synthesize(w_dst);
    p.f_a = e1->forward(f0, p.taps_g.tap(Resolution::R64));
    p.flow = predict(p);
    p.f_wa = warp_mode == WarpMode::None ? p.f_a : warp(p.f_a, p.flow.data);
    p.f = e2->forward(p.f_wa, p.taps_e.tap(Resolution::R64));
    p.image = gen().synthesize_with_injection(w_dst, {p.f, Resolution::R64});
    return p;
}

PipelineOutput WarpResModel::forward_pipeline(const torch::Tensor& x, const torch::Tensor& alpha, const LatentCode& w_r,
                                              bool with_flow_gt) {
    auto enc = e0->encode(x);
    const bool no_edit = (alpha == 0).all().item<bool>();
    auto w_alpha = no_edit ? enc.w : simulate_edit(enc.w, w_r, alpha);
    auto p = run_pass(enc.f0.data, enc.w, w_alpha, no_edit);
    PipelineOutput out;
    out.image_out = p.image;
    out.f_a = p.f_a;
    out.f_wa = p.f_wa;
    out.f = p.f;
    out.flow_pred = p.flow;
    out.w = enc.w;
    out.w_alpha = w_alpha;
    out.f0 = enc.f0.data;
    out.f_g = p.taps_g.tap(Resolution::R64);
    out.f_e = p.taps_e.tap(Resolution::R64);
    if (with_flow_gt) out.flow_gt = flow_target(p);
    return out;
}

torch::Tensor WarpResModel::invert(const torch::Tensor& x) {
    torch::NoGradGuard no_grad;
    auto enc = e0->encode(x);
    return run_pass(enc.f0.data, enc.w, enc.w, true).image;
}

torch::Tensor WarpResModel::edit(const torch::Tensor& x, const EditDirection& dir, double strength) {
    torch::NoGradGuard no_grad;
    auto enc = e0->encode(x);
    auto w_dst = apply_direction(enc.w, dir, strength);
    // A no-op edit takes exactly the inversion path.
    if (strength == 0.0 || torch::equal(w_dst.codes, enc.w.codes)) return run_pass(enc.f0.data, enc.w, enc.w, true).image;
    return run_pass(enc.f0.data, enc.w, w_dst, false).image;
}

std::vector<torch::Tensor> WarpResModel::trainable_parameters() const {
    std::vector<torch::Tensor> out;
    for (auto* m : {static_cast<const torch::nn::Module*>(e1.get()), static_cast<const torch::nn::Module*>(e2.get()),
                    static_cast<const torch::nn::Module*>(flow.get())})
        for (const auto& p : m->parameters(true)) out.push_back(p);
    return out;
}

void WarpResModel::store(Checkpoint& ck) const {
    store_generator_bundle(ck, bundle);
    ck.put_module("e0", *e0);
    ck.put_module("e1", *e1);
    ck.put_module("e2", *e2);
    ck.put_module("flow", *flow);
    ck.put_module("adversary", *disc);
    ck.manifest["warp_mode"] = to_string(warp_mode);
    ck.manifest["oracle"] = {{"block_size", oracle.block_size},
                             {"search_radius", oracle.search_radius},
                             {"stride", oracle.stride}};
}

void WarpResModel::restore(const Checkpoint& ck) {
    ck.load_module("e1", *e1);
    ck.load_module("e2", *e2);
    ck.load_module("flow", *flow);
    ck.load_module("adversary", *disc);
}

std::unique_ptr<WarpResModel> WarpResModel::load(const std::string& path, std::optional<WarpMode> mode) {
    auto ck = Checkpoint::load(path);
    if (!ck.has_namespace("e1")) throw FormatError(path + " is not a trained model checkpoint");
    Config cfg;
    auto bundle = load_generator_bundle(ck);
    cfg.model = bundle.model;
    cfg.ablation.warp_mode = mode.value_or(warp_mode_from_string(ck.manifest.at("warp_mode").get<std::string>()));
    const auto& o = ck.manifest.at("oracle");
    cfg.oracle = {o.at("block_size").get<int64_t>(), o.at("search_radius").get<int64_t>(), o.at("stride").get<int64_t>()};
    auto e0 = load_base_encoder(ck, bundle.model);
    auto m = std::make_unique<WarpResModel>(cfg, std::move(bundle), std::move(e0));
    m->restore(ck);
    for (auto* mod : {static_cast<torch::nn::Module*>(m->e1.get()), static_cast<torch::nn::Module*>(m->e2.get()),
                      static_cast<torch::nn::Module*>(m->flow.get())})
        mod->eval();
    return m;
}

} // namespace warpres
