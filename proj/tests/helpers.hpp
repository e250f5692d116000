#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <torch/torch.h>

#include "warpres/config.hpp"
#include "warpres/pipeline.hpp"
#include "warpres/plugins.hpp"

namespace warpres::test {

/// Narrow model so unit tests run in seconds.
inline ModelConfig tiny_model() {
    ModelConfig m;
    m.tap_channels = {8, 8, 8};
    m.f0_channels = 8;
    m.fa_channels = 8;
    m.e0_width = 8;
    m.e1_width = 8;
    m.e2_width = 8;
    m.flow_width = 8;
    m.corr_radius = 2;
    m.disc_width = 8;
    m.ident_width = 8;
    m.ident_dim = 16;
    m.gen_width = 16;
    return m;
}

inline Config tiny_config(uint64_t seed = 3) {
    Config c;
    c.model = tiny_model();
    c.seed = seed;
    c.data.batch_size = 2;
    c.data.marks_per_image = 4;
    c.data.probe_size = 2;
    c.schedule.lr = 1e-3;
    c.schedule.milestones = {};
    c.schedule.log_every = 1;
    c.schedule.epe_every = 0;
    c.schedule.checkpoint_every = 0;
    c.schedule.disc_warmup_steps = 5;
    c.schedule.gan_steps = 5;
    c.schedule.e0_steps = 5;
    c.schedule.e0_batch = 4;
    return c;
}

/// In-memory generator bundle with an untrained discriminator.
inline GeneratorBundle tiny_bundle(const ModelConfig& m, uint64_t seed = 5) {
    GeneratorBundle b;
    b.model = m;
    b.seed = seed;
    b.gen = make_generator(m, seed);
    b.gen->freeze();
    torch::manual_seed(seed);
    b.disc = Discriminator(m);
    freeze_module(*b.disc);
    b.embedder_seed = seed + 1;
    b.embedder = make_identity_embedder(m, b.embedder_seed);
    return b;
}

inline std::unique_ptr<WarpResModel> tiny_warpres(const Config& c) {
    auto b = tiny_bundle(c.model);
    torch::manual_seed(11);
    BaseEncoder e0(c.model);
    freeze_module(*e0);
    return std::make_unique<WarpResModel>(c, std::move(b), std::move(e0));
}

/// Embeds an image as its flattened, normalised pixels.
class FlattenEmbedder : public IdentityEmbedder {
public:
    torch::Tensor embed(const torch::Tensor& x) override {
        auto f = x.flatten(1);
        return f / f.norm(2, 1, true).clamp_min(1e-12);
    }
    std::string fingerprint() const override { return "flatten"; }
};

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("warpres_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace warpres::test
