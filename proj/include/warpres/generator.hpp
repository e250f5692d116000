#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "warpres/config.hpp"
#include "warpres/latent.hpp"
#include "warpres/types.hpp"

namespace warpres {

/// Style-based generator with R16/R32/R64 feature taps and an additive
/// residual injection point at the R64 stage.
///
/// Style layers are ordered coarse to fine. Weights are frozen once the
/// generator has been built or pretrained.
class Generator : public torch::nn::Module {
public:
    explicit Generator(const ModelConfig& cfg);
    ~Generator() override = default;

    /// Image plus the three taps for W+ code `w` ([L, D] or [N, L, D]).
    GeneratorTaps synthesize(const LatentCode& w);

    /// Same computation as synthesize(), except the R64 feature becomes
    /// F_e + f before the layers that follow it.
    torch::Tensor synthesize_with_injection(const LatentCode& w, const FeatureMap& f);

    /// Both outputs of the injected pass; `taps.tap(R64)` is F_e, before the sum.
    GeneratorTaps synthesize_full(const LatentCode& w, const torch::Tensor* injection);

    MappingNetwork& mapping() { return mapping_; }
    const ModelConfig& config() const { return cfg_; }
    Substrate substrate() const { return cfg_.substrate; }

    /// Freezes every parameter (requires_grad = false).
    void freeze();

protected:
    /// Implementations render taps and the pre-activation RGB at the R64 grid.
    /// `injection` (may be null) is added to the R64 feature before `head`.
    virtual GeneratorTaps render(const torch::Tensor& codes, const torch::Tensor* injection) = 0;

    ModelConfig cfg_;
    MappingNetwork mapping_{nullptr};
};

/// Analytic blob renderer.
///
/// Every style layer drives a few Gaussian blobs whose position, scale and
/// colour are affine in that layer's code. Layers 0-2 composite at the R16
/// grid, 3-5 at R32 and 6-7 at R64; coarser buffers are bilinearly upsampled
/// into the next level. Layer 0 holds the global object offset, so moving
/// along its rows translates the whole object. Feature channels 0-2 carry
/// colour, the remaining channels a fixed per-blob identity code.
class ProceduralGenerator : public Generator {
public:
    struct Blob {
        std::string name;
        int layer;
        int level;
        double anchor_x, anchor_y; // relative to the object centre, image px at 64
        double pos_scale_x, pos_scale_y;
        double sigma;
        double aspect; // sigma_x / sigma_y
        std::array<double, 3> color;
    };

    /// Projection rows are drawn from `seed`; the mapping network is
    /// initialised from the same seed and whitened.
    ProceduralGenerator(const ModelConfig& cfg, uint64_t seed);

    static const std::vector<Blob>& blobs();
    static constexpr double kOffsetScale = 3.5; // px of global offset per unit parameter
    static constexpr double kMouthNeutral = 9.0; // px below the head centre

    /// Scalar parameters per batch entry: [N, P]. Index layout in param_index().
    torch::Tensor style_params(const torch::Tensor& codes) const;
    /// component: 0 dx, 1 dy, 2 log-scale, 3..5 colour.
    static int param_index(const std::string& blob, int component);
    static int offset_index(int axis) { return axis; } // 0 = x, 1 = y
    static int num_params();

    /// Blob centres in image pixels, [N, K, 2] in blobs() order.
    torch::Tensor blob_centers(const LatentCode& w) const;

    /// Row `index` of the projection, as an [L, D] W+ direction living on its layer.
    torch::Tensor param_direction(int index) const;

    /// Image-pixel translation direction: one unit of strength moves every blob
    /// by one pixel along `axis`.
    EditDirection pose_direction(int axis = 0) const;
    /// Raises the mouth blob by one parameter unit per unit of strength.
    EditDirection smile_direction() const;

    double pixel_scale() const { return static_cast<double>(cfg_.image_size) / 64.0; }

protected:
    GeneratorTaps render(const torch::Tensor& codes, const torch::Tensor* injection) override;

private:
    torch::Tensor render_level(const torch::Tensor& params, int level) const;

    torch::Tensor proj_;       // [P, D]
    torch::Tensor proj_layer_; // [P] style layer of each row (int64)
    torch::Tensor identity_;   // [K, Cmax - 3] per-blob identity code
    torch::Tensor head_bias_;  // [3]
};

/// Small StyleGAN2-like generator with modulated convolutions, trained
/// adversarially in GAN substrate mode.
class StyleConvGenerator : public Generator {
public:
    StyleConvGenerator(const ModelConfig& cfg, uint64_t seed);

protected:
    GeneratorTaps render(const torch::Tensor& codes, const torch::Tensor* injection) override;

private:
    torch::Tensor const_input_;
    torch::nn::ModuleList convs_{nullptr};
};

std::shared_ptr<Generator> make_generator(const ModelConfig& cfg, uint64_t seed);

/// Convolutional discriminator with a sigmoid head.
class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(const ModelConfig& cfg);

    struct Output {
        torch::Tensor logit;               // [N]
        torch::Tensor penultimate;         // [N, 64]
        std::vector<torch::Tensor> layers; // conv activations, coarse to fine order of depth
    };
    Output run(const torch::Tensor& x);

    /// Probability-like score in (0, 1), [N].
    torch::Tensor discriminate(const torch::Tensor& x);

private:
    int64_t image_size_;
    torch::nn::ModuleList convs_{nullptr};
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Frozen random convolutional embedder with unit-norm output.
class ConvEmbedderImpl : public torch::nn::Module {
public:
    explicit ConvEmbedderImpl(const ModelConfig& cfg);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d c1_{nullptr}, c2_{nullptr}, c3_{nullptr};
    torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(ConvEmbedder);

void freeze_module(torch::nn::Module& m);

} // namespace warpres
