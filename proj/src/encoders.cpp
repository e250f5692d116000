#include "warpres/encoders.hpp"

#include <cmath>

#include "warpres/errors.hpp"

namespace warpres {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t k = 3, int64_t stride = 1) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2));
}

torch::Tensor lrelu(const torch::Tensor& x) { return torch::leaky_relu(x, 0.2); }

// conv - lrelu - conv with an identity (or pooled) shortcut.
class ResBlockImpl : public torch::nn::Module {
public:
    ResBlockImpl(int64_t width, bool down) : down_(down) {
        c1_ = register_module("c1", conv(width, width, 3, down ? 2 : 1));
        c2_ = register_module("c2", conv(width, width));
    }
    torch::Tensor forward(const torch::Tensor& x) {
        auto skip = down_ ? F::avg_pool2d(x, F::AvgPool2dFuncOptions(2)) : x;
        return skip + c2_->forward(lrelu(c1_->forward(x)));
    }

private:
    bool down_;
    torch::nn::Conv2d c1_{nullptr}, c2_{nullptr};
};
TORCH_MODULE(ResBlock);

void check_pair(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.dim() != 4 || b.dim() != 4) throw ShapeError(std::string(what) + ": inputs must be [N, C, H, W]");
    if (a.size(0) != b.size(0) || a.size(2) != b.size(2) || a.size(3) != b.size(3))
        throw ShapeError(std::string(what) + ": resolution mismatch " + c10::str(a.sizes()) + " vs " +
                         c10::str(b.sizes()));
}

} // namespace

// ---------------------------------------------------------------------------

BaseEncoderImpl::BaseEncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
    const int64_t w = cfg.e0_width;
    stem_ = register_module("stem", conv(3, w));
    f0_conv_ = register_module("f0", conv(w, cfg.f0_channels));
    down_ = register_module("down", torch::nn::ModuleList());
    // Down to 4x4 from the R64 grid.
    int64_t res = cfg.injection_resolution(), ch = w;
    while (res > 4) {
        const int64_t next = std::min<int64_t>(2 * ch, 4 * w);
        down_->push_back(conv(ch, next, 3, 2));
        ch = next;
        res /= 2;
    }
    head_ = register_module("head", torch::nn::Linear(ch * 16, cfg.latent_layers * cfg.latent_dim));
}

BaseEncoding BaseEncoderImpl::encode(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != 3 || x.size(2) != cfg_.image_size || x.size(3) != cfg_.image_size)
        throw ShapeError("encode_base: expected [N, 3, " + std::to_string(cfg_.image_size) + ", " +
                         std::to_string(cfg_.image_size) + "], got " + c10::str(x.sizes()));
    auto in = x;
    const int64_t r = cfg_.injection_resolution();
    if (cfg_.image_size != r) in = F::avg_pool2d(in, F::AvgPool2dFuncOptions(cfg_.image_size / r));
    auto h = lrelu(stem_->forward(in));
    BaseEncoding out;
    out.f0 = {lrelu(f0_conv_->forward(h)), Resolution::R64};
    for (auto& m : *down_) h = lrelu(m->as<torch::nn::Conv2d>()->forward(h));
    out.w = {head_->forward(h.flatten(1)).view({x.size(0), cfg_.latent_layers, cfg_.latent_dim})};
    return out;
}

// ---------------------------------------------------------------------------

int64_t receptive_field(const std::vector<RfLayer>& chain) {
    double rf = 1.0, jump = 1.0;
    for (const auto& l : chain) {
        rf += static_cast<double>(l.kernel - 1) * jump;
        jump *= l.stride;
    }
    return static_cast<int64_t>(std::llround(rf));
}

std::vector<RfLayer> ResidualDetectorImpl::deepest_path() {
    std::vector<RfLayer> chain{{3, 1.0}};
    for (int i = 0; i < 3; ++i) {
        chain.push_back({3, 2.0});
        chain.push_back({3, 1.0});
    }
    for (int i = 0; i < 3; ++i) {
        chain.push_back({1, 0.5}); // nearest x2
        chain.push_back({3, 1.0}); // fuse
        chain.push_back({3, 1.0});
        chain.push_back({3, 1.0});
    }
    chain.push_back({3, 1.0});
    return chain;
}

ResidualDetectorImpl::ResidualDetectorImpl(const ModelConfig& cfg) {
    const int64_t in = cfg.f0_channels + cfg.tap_channels[2];
    const int64_t w = cfg.e1_width;
    in_conv_ = register_module("in_conv", conv(in, w));
    skip_ = register_module("skip_proj", conv(in, cfg.fa_channels, 1));
    down_ = register_module("down", torch::nn::ModuleList());
    fuse_ = register_module("fuse", torch::nn::ModuleList());
    up_res_ = register_module("up_res", torch::nn::ModuleList());
    for (int i = 0; i < 3; ++i) {
        down_->push_back(ResBlock(w, true));
        fuse_->push_back(conv(2 * w, w));
        up_res_->push_back(ResBlock(w, false));
    }
    out_conv_ = register_module("out_conv", conv(w, cfg.fa_channels));
}

torch::Tensor ResidualDetectorImpl::forward(const torch::Tensor& f0, const torch::Tensor& f_g) {
    check_pair(f0, f_g, "detect_residual");
    if (f0.size(2) % 8 != 0 || f0.size(3) % 8 != 0)
        throw ShapeError("detect_residual: spatial size must be a multiple of 8");
    auto in = torch::cat({f0, f_g}, 1);
    auto h = lrelu(in_conv_->forward(in));
    std::vector<torch::Tensor> skips{h};
    for (int i = 0; i < 3; ++i) {
        h = lrelu(down_[i]->as<ResBlockImpl>()->forward(h));
        if (i < 2) skips.push_back(h);
    }
    for (int i = 0; i < 3; ++i) {
        const auto& s = skips[2 - i];
        h = F::interpolate(h, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{s.size(2), s.size(3)})
                                  .mode(torch::kNearest));
        h = lrelu(fuse_[i]->as<torch::nn::Conv2d>()->forward(torch::cat({h, s}, 1)));
        h = lrelu(up_res_[i]->as<ResBlockImpl>()->forward(h));
    }
    return out_conv_->forward(h) + skip_->forward(in);
}

FeatureMap ResidualDetectorImpl::detect(const FeatureMap& f0, const FeatureMap& f_g) {
    if (f0.tag != Resolution::R64 || f_g.tag != Resolution::R64)
        throw ShapeError("detect_residual: both inputs must be R64 features");
    return {forward(f0.data, f_g.data), Resolution::R64};
}

// ---------------------------------------------------------------------------

RefinerImpl::RefinerImpl(const ModelConfig& cfg) : width_(cfg.e2_width) {
    reduce_a_ = register_module("reduce_a", conv(cfg.fa_channels, width_ / 2));
    reduce_e_ = register_module("reduce_e", conv(cfg.tap_channels[2], width_ / 2));
    blocks_ = register_module("blocks", torch::nn::ModuleList());
    for (int i = 0; i < 4; ++i) blocks_->push_back(ResBlock(width_, false));
    out_conv_ = register_module("out_conv", conv(width_, cfg.injection_channels()));
}

torch::Tensor RefinerImpl::trunk_input(const torch::Tensor& f_wa, const torch::Tensor& f_e) {
    check_pair(f_wa, f_e, "refine");
    return torch::cat({lrelu(reduce_a_->forward(f_wa)), lrelu(reduce_e_->forward(f_e))}, 1);
}

torch::Tensor RefinerImpl::forward(const torch::Tensor& f_wa, const torch::Tensor& f_e) {
    auto h = trunk_input(f_wa, f_e);
    for (auto& b : *blocks_) h = lrelu(b->as<ResBlockImpl>()->forward(h));
    return out_conv_->forward(h);
}

FeatureMap RefinerImpl::refine(const FeatureMap& f_wa, const FeatureMap& f_e) {
    if (f_wa.tag != Resolution::R64 || f_e.tag != Resolution::R64)
        throw ShapeError("refine: both inputs must be R64 features");
    return {forward(f_wa.data, f_e.data), Resolution::R64};
}

} // namespace warpres
