#include <algorithm>
#include <cmath>

#include <ATen/Dispatch.h>
#include <torch/torch.h>

#include "warpres/errors.hpp"
#include "warpres/flowwarp.hpp"

namespace warpres {

namespace {

struct Tap {
    int64_t x0, x1, y0, y1;
    double wx, wy;
    bool inside_x, inside_y;
};

template <typename T>
Tap bilinear_tap(T x, T y, T dx, T dy, int64_t h, int64_t w) {
    const T raw_x = x + dx;
    const T raw_y = y + dy;
    const T max_x = static_cast<T>(w - 1);
    const T max_y = static_cast<T>(h - 1);
    const T sx = std::clamp(raw_x, T(0), max_x);
    const T sy = std::clamp(raw_y, T(0), max_y);
    Tap t;
    t.x0 = static_cast<int64_t>(std::floor(sx));
    t.y0 = static_cast<int64_t>(std::floor(sy));
    t.x1 = std::min(t.x0 + 1, w - 1);
    t.y1 = std::min(t.y0 + 1, h - 1);
    t.wx = static_cast<double>(sx - static_cast<T>(t.x0));
    t.wy = static_cast<double>(sy - static_cast<T>(t.y0));
    t.inside_x = raw_x >= T(0) && raw_x <= max_x;
    t.inside_y = raw_y >= T(0) && raw_y <= max_y;
    return t;
}

template <typename T>
void warp_forward_kernel(const T* f, const T* flow, T* out, int64_t n, int64_t c, int64_t h, int64_t w) {
    const int64_t plane = h * w;
    for (int64_t b = 0; b < n; ++b) {
        const T* fb = f + b * c * plane;
        const T* fx = flow + b * 2 * plane;
        const T* fy = fx + plane;
        T* ob = out + b * c * plane;
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                const int64_t p = y * w + x;
                const Tap t = bilinear_tap<T>(static_cast<T>(x), static_cast<T>(y), fx[p], fy[p], h, w);
                const T wx = static_cast<T>(t.wx);
                const T wy = static_cast<T>(t.wy);
                const int64_t i00 = t.y0 * w + t.x0, i01 = t.y0 * w + t.x1;
                const int64_t i10 = t.y1 * w + t.x0, i11 = t.y1 * w + t.x1;
                for (int64_t ch = 0; ch < c; ++ch) {
                    const T* fc = fb + ch * plane;
                    const T top = (T(1) - wx) * fc[i00] + wx * fc[i01];
                    const T bottom = (T(1) - wx) * fc[i10] + wx * fc[i11];
                    ob[ch * plane + p] = (T(1) - wy) * top + wy * bottom;
                }
            }
        }
    }
}

template <typename T>
void warp_backward_kernel(const T* f, const T* flow, const T* grad_out, T* grad_f, T* grad_flow, int64_t n,
                          int64_t c, int64_t h, int64_t w) {
    const int64_t plane = h * w;
    for (int64_t b = 0; b < n; ++b) {
        const T* fb = f + b * c * plane;
        const T* fx = flow + b * 2 * plane;
        const T* fy = fx + plane;
        const T* gb = grad_out + b * c * plane;
        T* gfb = grad_f ? grad_f + b * c * plane : nullptr;
        T* gx = grad_flow ? grad_flow + b * 2 * plane : nullptr;
        T* gy = gx ? gx + plane : nullptr;
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                const int64_t p = y * w + x;
                const Tap t = bilinear_tap<T>(static_cast<T>(x), static_cast<T>(y), fx[p], fy[p], h, w);
                const T wx = static_cast<T>(t.wx);
                const T wy = static_cast<T>(t.wy);
                const int64_t i00 = t.y0 * w + t.x0, i01 = t.y0 * w + t.x1;
                const int64_t i10 = t.y1 * w + t.x0, i11 = t.y1 * w + t.x1;
                T acc_x = 0, acc_y = 0;
                for (int64_t ch = 0; ch < c; ++ch) {
                    const T g = gb[ch * plane + p];
                    if (gfb) {
                        T* gc = gfb + ch * plane;
                        gc[i00] += g * (T(1) - wx) * (T(1) - wy);
                        gc[i01] += g * wx * (T(1) - wy);
                        gc[i10] += g * (T(1) - wx) * wy;
                        gc[i11] += g * wx * wy;
                    }
                    if (gx) {
                        const T* fc = fb + ch * plane;
                        acc_x += g * ((T(1) - wy) * (fc[i01] - fc[i00]) + wy * (fc[i11] - fc[i10]));
                        acc_y += g * ((T(1) - wx) * (fc[i10] - fc[i00]) + wx * (fc[i11] - fc[i01]));
                    }
                }
                if (gx) {
                    gx[p] = t.inside_x ? acc_x : T(0);
                    gy[p] = t.inside_y ? acc_y : T(0);
                }
            }
        }
    }
}

torch::Tensor warp_forward(const torch::Tensor& f, const torch::Tensor& flow) {
    auto out = torch::empty_like(f);
    AT_DISPATCH_FLOATING_TYPES(f.scalar_type(), "warp_forward", [&] {
        warp_forward_kernel<scalar_t>(f.data_ptr<scalar_t>(), flow.data_ptr<scalar_t>(), out.data_ptr<scalar_t>(),
                                      f.size(0), f.size(1), f.size(2), f.size(3));
    });
    return out;
}

class WarpFunction : public torch::autograd::Function<WarpFunction> {
public:
    static torch::Tensor forward(torch::autograd::AutogradContext* ctx, torch::Tensor f, torch::Tensor flow) {
        ctx->save_for_backward({f, flow});
        return warp_forward(f, flow);
    }

    static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                                 torch::autograd::tensor_list grad_outputs) {
        auto saved = ctx->get_saved_variables();
        const auto& f = saved[0];
        const auto& flow = saved[1];
        auto grad_out = grad_outputs[0].contiguous();
        const bool need_f = ctx->needs_input_grad(0);
        const bool need_flow = ctx->needs_input_grad(1);
        torch::Tensor grad_f = need_f ? torch::zeros_like(f) : torch::Tensor();
        torch::Tensor grad_flow = need_flow ? torch::zeros_like(flow) : torch::Tensor();
        AT_DISPATCH_FLOATING_TYPES(f.scalar_type(), "warp_backward", [&] {
            warp_backward_kernel<scalar_t>(f.data_ptr<scalar_t>(), flow.data_ptr<scalar_t>(),
                                           grad_out.data_ptr<scalar_t>(),
                                           need_f ? grad_f.data_ptr<scalar_t>() : nullptr,
                                           need_flow ? grad_flow.data_ptr<scalar_t>() : nullptr, f.size(0),
                                           f.size(1), f.size(2), f.size(3));
        });
        return {grad_f, grad_flow};
    }
};

} // namespace

torch::Tensor warp(const torch::Tensor& f, const torch::Tensor& flow) {
    const bool single = f.dim() == 3;
    auto fb = single ? f.unsqueeze(0) : f;
    auto fl = flow.dim() == 3 ? flow.unsqueeze(0) : flow;
    if (fb.dim() != 4 || fl.dim() != 4 || fl.size(1) != 2)
        throw ShapeError("warp expects f [N,C,H,W] and flow [N,2,H,W]");
    if (fb.size(2) != fl.size(2) || fb.size(3) != fl.size(3))
        throw ShapeError("warp: feature map " + std::to_string(fb.size(2)) + "x" + std::to_string(fb.size(3)) +
                         " does not match flow " + std::to_string(fl.size(2)) + "x" + std::to_string(fl.size(3)));
    if (fl.size(0) != fb.size(0)) {
        if (fl.size(0) != 1) throw ShapeError("warp: batch size mismatch between features and flow");
        fl = fl.expand({fb.size(0), 2, fl.size(2), fl.size(3)});
    }
    fl = fl.to(fb.scalar_type()).contiguous();
    auto out = WarpFunction::apply(fb.contiguous(), fl);
    return single ? out.squeeze(0) : out;
}

FeatureMap warp(const FeatureMap& f, const FlowField& flow) { return {warp(f.data, flow.data), f.tag}; }

FlowField rescale_flow(const FlowField& flow, int64_t target) {
    if (target <= 0) throw ShapeError("rescale_flow: target resolution must be positive");
    const int64_t source = flow.width();
    if (flow.height() != source) throw ShapeError("rescale_flow: flow field must be square");
    if (target == source) return flow;
    if (target % source != 0 && source % target != 0)
        throw ShapeError("rescale_flow: resolutions " + std::to_string(source) + " and " + std::to_string(target) +
                         " are not integer multiples");
    const bool single = flow.data.dim() == 3;
    auto data = single ? flow.data.unsqueeze(0) : flow.data;
    namespace F = torch::nn::functional;
    auto resized = F::interpolate(data, F::InterpolateFuncOptions()
                                            .size(std::vector<int64_t>{target, target})
                                            .mode(torch::kBilinear)
                                            .align_corners(false));
    resized = resized * (static_cast<double>(target) / static_cast<double>(source));
    return {single ? resized.squeeze(0) : resized};
}

torch::Tensor area_downsample(const torch::Tensor& x, int64_t factor) {
    if (factor == 1) return x;
    const bool single = x.dim() == 3;
    auto b = single ? x.unsqueeze(0) : x;
    auto out = torch::avg_pool2d(b, {factor, factor}, {factor, factor});
    return single ? out.squeeze(0) : out;
}

torch::Tensor correlation(const torch::Tensor& a, const torch::Tensor& b, int64_t radius) {
    const int64_t h = a.size(2), w = a.size(3);
    auto padded = torch::constant_pad_nd(b, {radius, radius, radius, radius}, 0.0);
    std::vector<torch::Tensor> planes;
    planes.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
    for (int64_t dy = -radius; dy <= radius; ++dy) {
        for (int64_t dx = -radius; dx <= radius; ++dx) {
            auto shifted = padded.slice(2, radius + dy, radius + dy + h).slice(3, radius + dx, radius + dx + w);
            planes.push_back((a * shifted).mean(1));
        }
    }
    return torch::stack(planes, 1);
}

} // namespace warpres
