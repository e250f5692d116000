#include "warpres/generator.hpp"

#include <cmath>

#include "warpres/errors.hpp"

namespace warpres {

namespace F = torch::nn::functional;

namespace {

constexpr double kCanvas = 64.0; // blob geometry is defined on a 64 px canvas
constexpr int kParamsPerBlob = 6;

torch::Tensor upsample2x(const torch::Tensor& x, int64_t size) {
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{size, size})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

// Channel lift between levels: keeps the shared leading channels, drops or
// zero-pads the rest.
torch::Tensor lift_channels(const torch::Tensor& x, int64_t out_channels) {
    const int64_t c = x.size(1);
    if (c == out_channels) return x;
    if (c > out_channels) return x.narrow(1, 0, out_channels);
    return F::pad(x, F::PadFuncOptions({0, 0, 0, 0, 0, out_channels - c}));
}

} // namespace

// ---------------------------------------------------------------------------

Generator::Generator(const ModelConfig& cfg) : cfg_(cfg) {
    mapping_ = register_module("mapping", MappingNetwork(cfg.z_dim, cfg.latent_dim, cfg.latent_layers));
}

GeneratorTaps Generator::synthesize(const LatentCode& w) { return synthesize_full(w, nullptr); }

torch::Tensor Generator::synthesize_with_injection(const LatentCode& w, const FeatureMap& f) {
    if (f.tag != Resolution::R64) throw ShapeError("injection feature must be tagged R64");
    return synthesize_full(w, &f.data).image;
}

GeneratorTaps Generator::synthesize_full(const LatentCode& w, const torch::Tensor* injection) {
    check_latent(w, cfg_.latent_layers, cfg_.latent_dim);
    auto codes = w.batched() ? w.codes : w.codes.unsqueeze(0);
    if (injection != nullptr) {
        const auto& f = *injection;
        const int64_t r = cfg_.injection_resolution();
        if (f.dim() != 4 || f.size(0) != codes.size(0) || f.size(1) != cfg_.injection_channels() || f.size(2) != r ||
            f.size(3) != r)
            throw ShapeError("injection feature has shape " + c10::str(f.sizes()) + ", expected [" +
                             std::to_string(codes.size(0)) + ", " + std::to_string(cfg_.injection_channels()) + ", " +
                             std::to_string(r) + ", " + std::to_string(r) + "]");
    }
    return render(codes, injection);
}

void Generator::freeze() { freeze_module(*this); }

void freeze_module(torch::nn::Module& m) {
    for (auto& p : m.parameters(true)) p.set_requires_grad(false);
}

// ---------------------------------------------------------------------------

const std::vector<ProceduralGenerator::Blob>& ProceduralGenerator::blobs() {
    // name, layer, level, anchor, position scale, sigma, aspect, colour
    static const std::vector<Blob> table{
        {"head", 1, 0, 0.0, 0.0, 1.5, 1.5, 11.0, 1.0, {1.5, 1.0, 0.55}},
        {"ear_l", 2, 0, -10.0, -9.0, 1.0, 1.0, 5.5, 1.0, {1.3, 0.8, 0.45}},
        {"ear_r", 2, 0, 10.0, -9.0, 1.0, 1.0, 5.5, 1.0, {1.3, 0.8, 0.45}},
        {"mouth", 3, 1, 0.0, kMouthNeutral, 1.0, 3.0, 3.5, 1.8, {-0.6, -0.3, 0.9}},
        {"eye_l", 4, 1, -5.0, -2.0, 0.8, 0.8, 2.2, 1.0, {-1.4, -1.2, -0.9}},
        {"eye_r", 4, 1, 5.0, -2.0, 0.8, 0.8, 2.2, 1.0, {-1.4, -1.2, -0.9}},
        {"nose", 5, 1, 0.0, 3.0, 0.8, 0.8, 2.0, 1.0, {0.6, -0.2, -0.2}},
        {"freckle", 6, 2, -7.0, 5.0, 1.0, 1.0, 1.3, 1.0, {-0.6, -0.5, -0.3}},
        {"spot", 7, 2, 7.0, 5.0, 1.0, 1.0, 1.3, 1.0, {0.3, 0.7, -0.5}},
    };
    return table;
}

int ProceduralGenerator::num_params() { return 2 + kParamsPerBlob * static_cast<int>(blobs().size()); }

int ProceduralGenerator::param_index(const std::string& blob, int component) {
    if (component < 0 || component >= kParamsPerBlob) throw Error("blob parameter component out of range");
    const auto& table = blobs();
    for (std::size_t k = 0; k < table.size(); ++k)
        if (table[k].name == blob) return 2 + kParamsPerBlob * static_cast<int>(k) + component;
    throw Error("unknown blob '" + blob + "'");
}

ProceduralGenerator::ProceduralGenerator(const ModelConfig& cfg, uint64_t seed) : Generator(cfg) {
    if (cfg.latent_layers != 8) throw ConfigError("model.latent_layers", "the procedural generator needs 8 style layers");
    const int64_t p = num_params();
    if (cfg.latent_dim < p)
        throw ConfigError("model.latent_dim", "the procedural generator needs latent_dim >= " + std::to_string(p));
    for (int i = 0; i < 3; ++i)
        if (cfg.tap_channels[i] < 4) throw ConfigError("model.tap_channels", "need at least 4 channels per tap");

    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    auto q = std::get<0>(torch::linalg_qr(torch::randn({cfg.latent_dim, cfg.latent_dim}, gen, torch::kFloat64)));
    proj_ = register_buffer("proj", q.t().narrow(0, 0, p).to(torch::kFloat32).contiguous());

    std::vector<int64_t> layer_of_row{0, 0};
    for (const auto& b : blobs())
        for (int c = 0; c < kParamsPerBlob; ++c) layer_of_row.push_back(b.layer);
    proj_layer_ = register_buffer("proj_layer", torch::tensor(layer_of_row, torch::kInt64));

    const int64_t cmax = *std::max_element(cfg.tap_channels.begin(), cfg.tap_channels.end());
    auto ident = torch::randn({static_cast<int64_t>(blobs().size()), cmax - 3}, gen);
    identity_ = register_buffer("identity", ident / ident.norm(2, 1, true));
    head_bias_ = register_buffer("head_bias", torch::tensor({-0.7F, -0.6F, -0.5F}));

    torch::manual_seed(seed);
    mapping_ = replace_module("mapping", MappingNetwork(cfg.z_dim, cfg.latent_dim, cfg.latent_layers));
    mapping_->fit_whitening(8192, seed);
}

torch::Tensor ProceduralGenerator::style_params(const torch::Tensor& codes) const {
    auto c = codes.dim() == 2 ? codes.unsqueeze(0) : codes;
    auto sel = c.index_select(1, proj_layer_.to(torch::kInt64)); // [N, P, D]
    return (sel * proj_.to(c.dtype())).sum(-1);
}

namespace {

struct BlobGeometry {
    torch::Tensor cx, cy, sigma; // [N, K] on the 64 px canvas
    torch::Tensor color;         // [N, K, 3]
};

BlobGeometry blob_geometry(const torch::Tensor& params) {
    const auto& table = ProceduralGenerator::blobs();
    const int64_t k = static_cast<int64_t>(table.size());
    auto opts = params.options();
    std::vector<double> ax, ay, sx, sy, base_sigma, base_color;
    for (const auto& b : table) {
        ax.push_back(b.anchor_x);
        ay.push_back(b.anchor_y);
        sx.push_back(b.pos_scale_x);
        sy.push_back(b.pos_scale_y);
        base_sigma.push_back(b.sigma);
        base_color.insert(base_color.end(), b.color.begin(), b.color.end());
    }
    auto t = [&](const std::vector<double>& v) { return torch::tensor(v, torch::kFloat64).to(opts.dtype()); };
    auto blob = params.narrow(1, 2, kParamsPerBlob * k).reshape({params.size(0), k, kParamsPerBlob});
    const double centre = (kCanvas - 1.0) / 2.0;
    auto ox = params.select(1, 0).unsqueeze(1) * ProceduralGenerator::kOffsetScale;
    auto oy = params.select(1, 1).unsqueeze(1) * ProceduralGenerator::kOffsetScale;
    BlobGeometry g;
    g.cx = centre + ox + t(ax) + t(sx) * blob.select(2, 0);
    g.cy = centre + oy + t(ay) + t(sy) * blob.select(2, 1);
    g.sigma = t(base_sigma) * torch::exp(0.15 * blob.select(2, 2));
    g.color = t(base_color).view({k, 3}) + 0.15 * blob.narrow(2, 3, 3);
    return g;
}

} // namespace

torch::Tensor ProceduralGenerator::render_level(const torch::Tensor& params, int level) const {
    const auto& table = blobs();
    const int64_t res = cfg_.tap_resolution[level];
    const int64_t channels = cfg_.tap_channels[level];
    std::vector<int64_t> idx;
    std::vector<double> aspect;
    for (std::size_t k = 0; k < table.size(); ++k)
        if (table[k].level == level) {
            idx.push_back(static_cast<int64_t>(k));
            aspect.push_back(table[k].aspect);
        }
    auto opts = params.options();
    auto index = torch::tensor(idx, torch::kInt64);
    auto g = blob_geometry(params);
    auto cx = g.cx.index_select(1, index).unsqueeze(-1).unsqueeze(-1); // [N, k, 1, 1]
    auto cy = g.cy.index_select(1, index).unsqueeze(-1).unsqueeze(-1);
    auto sig = g.sigma.index_select(1, index).unsqueeze(-1).unsqueeze(-1);
    auto asp = torch::tensor(aspect, torch::kFloat64).to(opts.dtype()).view({1, -1, 1, 1});

    // Pixel centres of this level mapped onto the canvas (half-pixel convention).
    auto coord = (torch::arange(res, opts) + 0.5) * (kCanvas / static_cast<double>(res)) - 0.5;
    auto gx = coord.view({1, 1, 1, res});
    auto gy = coord.view({1, 1, res, 1});
    auto dx = (gx - cx) / (sig * asp);
    auto dy = (gy - cy) / sig;
    auto weight = torch::exp(-0.5 * (dx * dx + dy * dy)); // [N, k, res, res]

    auto color = g.color.index_select(1, index); // [N, k, 3]
    auto ident = 0.8 * identity_.index_select(0, index).narrow(1, 0, channels - 3).to(opts.dtype());
    auto feat = torch::cat({color, ident.unsqueeze(0).expand({color.size(0), -1, -1})}, 2); // [N, k, C]
    return torch::einsum("nkc,nkyx->ncyx", {feat, weight});
}

GeneratorTaps ProceduralGenerator::render(const torch::Tensor& codes, const torch::Tensor* injection) {
    auto params = style_params(codes);
    GeneratorTaps out;
    out.taps[0] = render_level(params, 0);
    out.taps[1] = lift_channels(upsample2x(out.taps[0], cfg_.tap_resolution[1]), cfg_.tap_channels[1]) +
                  render_level(params, 1);
    out.taps[2] = lift_channels(upsample2x(out.taps[1], cfg_.tap_resolution[2]), cfg_.tap_channels[2]) +
                  render_level(params, 2);
    auto feat = injection != nullptr ? out.taps[2] + *injection : out.taps[2];
    auto pre = feat.narrow(1, 0, 3) + head_bias_.to(feat.dtype()).view({1, 3, 1, 1});
    if (cfg_.image_size != cfg_.tap_resolution[2]) pre = upsample2x(pre, cfg_.image_size);
    out.image = torch::tanh(pre);
    return out;
}

torch::Tensor ProceduralGenerator::blob_centers(const LatentCode& w) const {
    auto codes = w.batched() ? w.codes : w.codes.unsqueeze(0);
    auto g = blob_geometry(style_params(codes));
    // canvas px -> image px, half-pixel convention
    const double s = pixel_scale();
    return torch::stack({(g.cx + 0.5) * s - 0.5, (g.cy + 0.5) * s - 0.5}, 2);
}

torch::Tensor ProceduralGenerator::param_direction(int index) const {
    if (index < 0 || index >= num_params()) throw Error("style parameter index out of range");
    auto d = torch::zeros({cfg_.latent_layers, cfg_.latent_dim});
    d[proj_layer_[index].item().toLong()] = proj_[index];
    return d;
}

EditDirection ProceduralGenerator::pose_direction(int axis) const {
    EditDirection dir;
    dir.direction = param_direction(offset_index(axis)) / (kOffsetScale * pixel_scale());
    dir.name = axis == 0 ? "pose" : "pose_y";
    dir.default_strength = 4.0F;
    return dir;
}

EditDirection ProceduralGenerator::smile_direction() const {
    EditDirection dir;
    dir.direction = -param_direction(param_index("mouth", 1));
    dir.name = "smile";
    dir.default_strength = 3.0F;
    return dir;
}

// ---------------------------------------------------------------------------

namespace {

class ModConvImpl : public torch::nn::Module {
public:
    ModConvImpl(int64_t in, int64_t out, int64_t kernel, int64_t latent_dim, bool demodulate, bool upsample)
        : in_(in), out_(out), kernel_(kernel), demod_(demodulate), up_(upsample) {
        weight_ = register_parameter("weight", torch::randn({out, in, kernel, kernel}));
        bias_ = register_parameter("bias", torch::zeros({out}));
        affine_ = register_module("affine", torch::nn::Linear(latent_dim, in));
        torch::NoGradGuard no_grad;
        affine_->bias.fill_(1.0);
    }

    torch::Tensor forward(torch::Tensor x, const torch::Tensor& w) {
        if (up_) x = upsample2x(x, x.size(-1) * 2);
        const int64_t n = x.size(0), h = x.size(2), wd = x.size(3);
        auto s = affine_->forward(w); // [N, in]
        auto wt = weight_.unsqueeze(0) * s.view({n, 1, in_, 1, 1}) / std::sqrt(static_cast<double>(in_ * kernel_ * kernel_));
        if (demod_) wt = wt * torch::rsqrt(wt.pow(2).sum({2, 3, 4}, true) + 1e-8);
        auto y = F::conv2d(x.reshape({1, n * in_, h, wd}), wt.reshape({n * out_, in_, kernel_, kernel_}),
                           F::Conv2dFuncOptions().padding(kernel_ / 2).groups(n));
        return y.view({n, out_, h, wd}) + bias_.view({1, out_, 1, 1});
    }

private:
    int64_t in_, out_, kernel_;
    bool demod_, up_;
    torch::Tensor weight_, bias_;
    torch::nn::Linear affine_{nullptr};
};
TORCH_MODULE(ModConv);

} // namespace

StyleConvGenerator::StyleConvGenerator(const ModelConfig& cfg, uint64_t seed) : Generator(cfg) {
    if (cfg.latent_layers != 8) throw ConfigError("model.latent_layers", "the conv generator needs 8 style layers");
    const auto& r = cfg.tap_resolution;
    if (r[0] % 4 != 0) throw ConfigError("model.tap_resolution", "coarsest tap must be a multiple of 4");
    torch::manual_seed(seed);
    mapping_ = replace_module("mapping", MappingNetwork(cfg.z_dim, cfg.latent_dim, cfg.latent_layers));
    const int64_t gw = cfg.gen_width, d = cfg.latent_dim;
    const auto& c = cfg.tap_channels;
    const_input_ = register_parameter("const_input", torch::randn({1, gw, r[0] / 4, r[0] / 4}));
    convs_ = register_module("convs", torch::nn::ModuleList());
    convs_->push_back(ModConv(gw, gw, 3, d, true, false));    // l0
    convs_->push_back(ModConv(gw, gw, 3, d, true, true));     // l1
    convs_->push_back(ModConv(gw, c[0], 3, d, true, true));   // l2 -> R16
    convs_->push_back(ModConv(c[0], c[1], 3, d, true, true)); // l3
    convs_->push_back(ModConv(c[1], c[1], 3, d, true, false)); // l4 -> R32
    convs_->push_back(ModConv(c[1], c[2], 3, d, true, true)); // l5
    convs_->push_back(ModConv(c[2], c[2], 3, d, true, false)); // l6 -> R64
    convs_->push_back(ModConv(c[2], 3, 1, d, false, false));  // l7 toRGB
}

GeneratorTaps StyleConvGenerator::render(const torch::Tensor& codes, const torch::Tensor* injection) {
    const int64_t n = codes.size(0);
    auto x = const_input_.expand({n, -1, -1, -1});
    GeneratorTaps out;
    for (int l = 0; l < 7; ++l) {
        x = torch::leaky_relu(convs_[l]->as<ModConvImpl>()->forward(x, codes.select(1, l)), 0.2);
        if (l == 2) out.taps[0] = x;
        if (l == 4) out.taps[1] = x;
    }
    out.taps[2] = x;
    if (injection != nullptr) x = x + *injection;
    auto pre = convs_[7]->as<ModConvImpl>()->forward(x, codes.select(1, 7));
    if (cfg_.image_size != cfg_.tap_resolution[2]) pre = upsample2x(pre, cfg_.image_size);
    out.image = torch::tanh(pre);
    return out;
}

std::shared_ptr<Generator> make_generator(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.substrate == Substrate::Procedural) return std::make_shared<ProceduralGenerator>(cfg, seed);
    return std::make_shared<StyleConvGenerator>(cfg, seed);
}

// ---------------------------------------------------------------------------

DiscriminatorImpl::DiscriminatorImpl(const ModelConfig& cfg) : image_size_(cfg.image_size) {
    const int64_t w = cfg.disc_width;
    const std::array<int64_t, 5> ch{3, w, 2 * w, 4 * w, 4 * w};
    convs_ = register_module("convs", torch::nn::ModuleList());
    for (int i = 0; i < 4; ++i)
        convs_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(ch[i], ch[i + 1], 3).stride(2).padding(1)));
    fc1_ = register_module("fc1", torch::nn::Linear(4 * w * 16, 64));
    fc2_ = register_module("fc2", torch::nn::Linear(64, 1));
}

DiscriminatorImpl::Output DiscriminatorImpl::run(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != 3 || x.size(2) != image_size_ || x.size(3) != image_size_)
        throw ShapeError("discriminator input has shape " + c10::str(x.sizes()));
    Output out;
    auto h = x;
    for (auto& m : *convs_) {
        h = torch::leaky_relu(m->as<torch::nn::Conv2d>()->forward(h), 0.2);
        out.layers.push_back(h);
    }
    h = F::adaptive_avg_pool2d(h, F::AdaptiveAvgPool2dFuncOptions(4)).flatten(1);
    out.penultimate = torch::leaky_relu(fc1_->forward(h), 0.2);
    out.logit = fc2_->forward(out.penultimate).squeeze(1);
    return out;
}

torch::Tensor DiscriminatorImpl::discriminate(const torch::Tensor& x) {
    constexpr double eps = 1e-6;
    return torch::sigmoid(run(x).logit).clamp(eps, 1.0 - eps);
}

// ---------------------------------------------------------------------------

ConvEmbedderImpl::ConvEmbedderImpl(const ModelConfig& cfg) {
    const int64_t w = cfg.ident_width;
    auto conv = [](int64_t in, int64_t out, int64_t stride) {
        return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false));
    };
    c1_ = register_module("c1", conv(3, w, 2));
    c2_ = register_module("c2", conv(w, 2 * w, 2));
    c3_ = register_module("c3", conv(2 * w, 2 * w, 1));
    fc_ = register_module("fc", torch::nn::Linear(torch::nn::LinearOptions(2 * w, cfg.ident_dim).bias(false)));
}

torch::Tensor ConvEmbedderImpl::forward(const torch::Tensor& x) {
    // Odd activations on the mean-free image: a flat image maps to zero and the
    // embedding direction is set by the image's own content.
    auto h = torch::tanh(c1_->forward(x - x.mean({2, 3}, true)));
    h = torch::tanh(c2_->forward(h));
    h = torch::tanh(c3_->forward(h));
    h = fc_->forward(h.mean({2, 3}));
    return F::normalize(h, F::NormalizeFuncOptions().dim(1));
}

} // namespace warpres
