#pragma once

#include <memory>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "warpres/checkpoint.hpp"
#include "warpres/config.hpp"
#include "warpres/encoders.hpp"
#include "warpres/flowwarp.hpp"
#include "warpres/generator.hpp"
#include "warpres/plugins.hpp"

namespace warpres {

/// Anything that can reconstruct and edit images. Evaluation protocols only
/// talk to this interface.
class InversionModel {
public:
    virtual ~InversionModel() = default;
    virtual torch::Tensor invert(const torch::Tensor& x) = 0;
    virtual torch::Tensor edit(const torch::Tensor& x, const EditDirection& dir, double strength) = 0;
};

/// Pretrained, frozen generator with the discriminator warmed up next to it.
struct GeneratorBundle {
    ModelConfig model;
    uint64_t seed = 0;
    std::shared_ptr<Generator> gen;
    Discriminator disc{nullptr};
    std::shared_ptr<ConvIdentityEmbedder> embedder;
    uint64_t embedder_seed = 0;
    nlohmann::json pretrain = nlohmann::json::object();
};

void store_generator_bundle(Checkpoint& ck, const GeneratorBundle& b);
GeneratorBundle load_generator_bundle(const Checkpoint& ck);
BaseEncoder load_base_encoder(const Checkpoint& ck, const ModelConfig& model);

/// Outputs of one generator pass from the code pair (w_src, w_dst).
struct PassOutput {
    LatentCode w_src, w_dst;
    GeneratorTaps taps_g, taps_e;
    torch::Tensor f_a, f_wa, f, image;
    FlowField flow; // R64 grid, edited -> unedited
};

struct PipelineOutput {
    torch::Tensor image_out;
    torch::Tensor f_a, f_wa, f;
    FlowField flow_pred;
    std::optional<FlowField> flow_gt;
    LatentCode w, w_alpha;
    torch::Tensor f0, f_g, f_e;
};

/// The full inversion and editing model: frozen G and E0, trainable E1, E2,
/// flow net and adversary, plus the frozen feature plug-ins.
class WarpResModel : public InversionModel {
public:
    WarpResModel(const Config& cfg, GeneratorBundle bundle, BaseEncoder e0);

    ModelConfig model;
    WarpMode warp_mode;
    FlowOracleConfig oracle;
    GeneratorBundle bundle;
    BaseEncoder e0{nullptr};
    ResidualDetector e1{nullptr};
    Refiner e2{nullptr};
    FlowNet flow{nullptr};
    Discriminator disc{nullptr};
    std::shared_ptr<DiscriminatorFeatures> phi; // frozen copy of the pretrained discriminator

    Generator& gen() { return *bundle.gen; }

    /// One pass: residuals detected on (f0, G(w_src)), aligned to G(w_dst)
    /// and injected. `same_codes` reuses the unedited taps as the edited ones.
    PassOutput run_pass(const torch::Tensor& f0, const LatentCode& w_src, const LatentCode& w_dst, bool same_codes);

    /// Encode, simulate the edit toward w_r by alpha ([N] or scalar), run the
    /// pass. `with_flow_gt` also evaluates the oracle target.
    PipelineOutput forward_pipeline(const torch::Tensor& x, const torch::Tensor& alpha, const LatentCode& w_r,
                                    bool with_flow_gt);

    /// Pseudo ground truth between the generator renders of a pass, on the R64 grid.
    FlowField flow_target(const PassOutput& p) const;

    torch::Tensor invert(const torch::Tensor& x) override;
    torch::Tensor edit(const torch::Tensor& x, const EditDirection& dir, double strength) override;

    /// Parameters updated by the main optimizer (E1, E2 and the flow net).
    std::vector<torch::Tensor> trainable_parameters() const;

    void store(Checkpoint& ck) const;
    /// Restores E1, E2, flow net and adversary.
    void restore(const Checkpoint& ck);
    static std::unique_ptr<WarpResModel> load(const std::string& path, std::optional<WarpMode> mode = std::nullopt);

private:
    FlowField predict(const PassOutput& p);
};

} // namespace warpres
