#include "warpres/errors.hpp"
#include "warpres/flowwarp.hpp"

namespace warpres {

namespace {

// Decoders regress flow in units of this many pixels of their level, so
// displacements of a few pixels are reachable with unit-scale weights.
constexpr double kOutputScale = 4.0;
// Sharpness of the soft arg-min over the normalised matching cost.
constexpr double kMatchSharpness = 8.0;

torch::nn::Conv2d conv3(int64_t in, int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::Tensor unit(const torch::Tensor& t) { return t / (t.norm(2, 1, true) + 1e-6); }

/// Box-filtered squared difference between a(p) and b(p + d) for every d in the window.
torch::Tensor matching_cost(const torch::Tensor& a, const torch::Tensor& b, int64_t radius) {
    const int64_t h = a.size(2), w = a.size(3);
    auto padded = torch::replication_pad2d(b, {radius, radius, radius, radius});
    std::vector<torch::Tensor> planes;
    for (int64_t dy = -radius; dy <= radius; ++dy)
        for (int64_t dx = -radius; dx <= radius; ++dx) {
            auto shifted = padded.slice(2, radius + dy, radius + dy + h).slice(3, radius + dx, radius + dx + w);
            planes.push_back((a - shifted).pow(2).mean(1));
        }
    return torch::avg_pool2d(torch::stack(planes, 1), {3, 3}, {1, 1}, {1, 1}, false, false);
}

/// Expected displacement under softmax(-cost). Costs are normalised per pixel, so
/// a perfect match dominates and textureless regions stay close to zero.
torch::Tensor soft_match(const torch::Tensor& cost, int64_t radius) {
    auto scale = cost.mean(1, true) + 1e-3 * cost.mean() + 1e-12;
    auto p = torch::softmax(-kMatchSharpness * cost / scale, 1);
    auto offsets = torch::arange(-radius, radius + 1, cost.options());
    const int64_t k = 2 * radius + 1;
    auto dx = offsets.repeat({k}).view({1, -1, 1, 1});
    auto dy = offsets.repeat_interleave(k).view({1, -1, 1, 1});
    return torch::cat({(p * dx).sum(1, true), (p * dy).sum(1, true)}, 1);
}

} // namespace

FlowNetImpl::FlowNetImpl(const ModelConfig& cfg) : cfg_(cfg) {
    const int64_t fw = cfg.flow_width;
    const int64_t corr_ch = (2 * cfg.corr_radius + 1) * (2 * cfg.corr_radius + 1);
    adapters_ = register_module("adapters", torch::nn::ModuleList());
    decoders_ = register_module("decoders", torch::nn::ModuleList());
    for (int level = 0; level < 3; ++level) {
        adapters_->push_back(conv3(cfg.tap_channels[level], fw));
        const int64_t in = corr_ch + 2 * fw + 2 + (level > 0 ? 2 : 0);
        torch::nn::Sequential dec(conv3(in, 2 * fw), torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)),
                                  conv3(2 * fw, fw), torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)),
                                  conv3(fw, 2));
        // The residual head starts near zero so the untrained net returns the matching prior.
        auto head = dec[4]->as<torch::nn::Conv2d>();
        torch::NoGradGuard no_grad;
        head->weight.mul_(0.1 / kOutputScale);
        head->bias.zero_();
        decoders_->push_back(dec);
    }
}

FlowField FlowNetImpl::forward(const std::array<torch::Tensor, 3>& taps_g, const std::array<torch::Tensor, 3>& taps_e) {
    for (int level = 0; level < 3; ++level) {
        if (!taps_g[level].defined() || !taps_e[level].defined())
            throw ShapeError("predict_flow: missing tap " + to_string(static_cast<Resolution>(level)));
        if (taps_g[level].size(-1) != cfg_.tap_resolution[level] || taps_e[level].size(-1) != cfg_.tap_resolution[level])
            throw ShapeError("predict_flow: tap " + to_string(static_cast<Resolution>(level)) +
                             " has the wrong resolution");
    }
    const int64_t r = cfg_.corr_radius;
    torch::Tensor flow;
    for (int level = 0; level < 3; ++level) {
        auto adapter = adapters_[level]->as<torch::nn::Conv2d>();
        auto decoder = decoders_[level]->as<torch::nn::Sequential>();
        auto raw_g = taps_g[level];
        torch::Tensor up;
        if (level > 0) {
            up = rescale_flow({flow}, cfg_.tap_resolution[level]).data;
            raw_g = warp(raw_g, up);
        }
        auto g = torch::leaky_relu(adapter->forward(raw_g), 0.2);
        auto e = torch::leaky_relu(adapter->forward(taps_e[level]), 0.2);
        auto prior = soft_match(matching_cost(taps_e[level], raw_g, r), r);
        auto corr = correlation(unit(e), unit(g), r);
        if (level == 0)
            flow = prior + kOutputScale * decoder->forward(torch::cat({corr, e, g, prior}, 1));
        else
            flow = up + prior + kOutputScale * decoder->forward(torch::cat({corr, e, g, prior, up}, 1));
    }
    return {flow};
}

} // namespace warpres
