#pragma once

#include <vector>

#include <torch/torch.h>

#include "warpres/config.hpp"
#include "warpres/latent.hpp"
#include "warpres/types.hpp"

namespace warpres {

struct BaseEncoding {
    FeatureMap f0;  // [N, C0, R64, R64]
    LatentCode w;   // [N, L, D]
};

/// E0: convolutional stem giving the high-rate feature F0 on the R64 grid,
/// and a strided trunk regressing the W+ code.
class BaseEncoderImpl : public torch::nn::Module {
public:
    explicit BaseEncoderImpl(const ModelConfig& cfg);
    BaseEncoding encode(const torch::Tensor& x);

private:
    ModelConfig cfg_;
    torch::nn::Conv2d stem_{nullptr}, f0_conv_{nullptr};
    torch::nn::ModuleList down_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(BaseEncoder);

/// One layer of a convolution stack as seen by receptive-field arithmetic.
struct RfLayer {
    int64_t kernel;
    double stride; // 0.5 for a x2 upsampling
};

/// Receptive field (pixels) of the last layer of a chain.
int64_t receptive_field(const std::vector<RfLayer>& chain);

/// E1: residual detector. F_a = out(lrelu(U-Net(in))) + skip(in), with
/// in = concat(F0, F_g).
class ResidualDetectorImpl : public torch::nn::Module {
public:
    explicit ResidualDetectorImpl(const ModelConfig& cfg);
    torch::Tensor forward(const torch::Tensor& f0, const torch::Tensor& f_g);
    FeatureMap detect(const FeatureMap& f0, const FeatureMap& f_g);

    /// Deepest path through the network (in_conv, three down blocks, three up
    /// blocks, out_conv).
    static std::vector<RfLayer> deepest_path();

    torch::nn::Conv2d& out_conv() { return out_conv_; }
    torch::nn::Conv2d& skip_proj() { return skip_; }

private:
    torch::nn::Conv2d in_conv_{nullptr}, skip_{nullptr}, out_conv_{nullptr};
    torch::nn::ModuleList down_{nullptr}, fuse_{nullptr}, up_res_{nullptr};
};
TORCH_MODULE(ResidualDetector);

/// E2: flat refiner. Both inputs are halved in width by a 3x3 conv,
/// concatenated, passed through four residual blocks and projected to the
/// injection channel count.
class RefinerImpl : public torch::nn::Module {
public:
    explicit RefinerImpl(const ModelConfig& cfg);
    torch::Tensor forward(const torch::Tensor& f_wa, const torch::Tensor& f_e);
    FeatureMap refine(const FeatureMap& f_wa, const FeatureMap& f_e);

    int64_t trunk_width() const { return width_; }
    torch::nn::Conv2d& out_conv() { return out_conv_; }
    /// Concatenated halved inputs, the trunk input.
    torch::Tensor trunk_input(const torch::Tensor& f_wa, const torch::Tensor& f_e);

private:
    int64_t width_;
    torch::nn::Conv2d reduce_a_{nullptr}, reduce_e_{nullptr}, out_conv_{nullptr};
    torch::nn::ModuleList blocks_{nullptr};
};
TORCH_MODULE(Refiner);

} // namespace warpres
