#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "warpres/errors.hpp"

namespace warpres {

enum class Substrate { Procedural, Gan };

/// How residual features are aligned with the edited generator features.
enum class WarpMode {
    Predicted, ///< flow net on generator taps (full model)
    None,      ///< residuals pass unwarped (StyleRes-style ablation)
    Oracle,    ///< block-matching flow on generated images
};

struct ModelConfig {
    Substrate substrate = Substrate::Procedural;
    int64_t image_size = 64;
    int64_t latent_layers = 8;
    int64_t latent_dim = 64;
    int64_t z_dim = 64;
    std::array<int64_t, 3> tap_resolution{16, 32, 64};
    std::array<int64_t, 3> tap_channels{128, 128, 128};
    int64_t f0_channels = 128;
    int64_t fa_channels = 128;
    int64_t e0_width = 64;
    int64_t e1_width = 128;
    int64_t e2_width = 128;
    int64_t flow_width = 32;
    int64_t corr_radius = 3;
    int64_t disc_width = 32;
    int64_t ident_width = 32;
    int64_t ident_dim = 64;
    int64_t gen_width = 64;

    int64_t injection_channels() const { return tap_channels[2]; }
    int64_t injection_resolution() const { return tap_resolution[2]; }
};

struct FlowOracleConfig {
    int64_t block_size = 7;
    int64_t search_radius = 8;
    int64_t stride = 2;

    void validate() const;
};

struct LossWeights {
    double a = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double r3 = 0.0;
    double f = 0.0;
    double fl = 0.0;

    static LossWeights face_no_edit();
    static LossWeights face_cycle();
    static LossWeights car_no_edit();
    static LossWeights car_cycle();

    bool operator==(const LossWeights&) const = default;
};

struct LambdaConfig {
    std::string preset = "face";
    LossWeights no_edit = LossWeights::face_no_edit();
    LossWeights cycle = LossWeights::face_cycle();
};

struct DataConfig {
    int64_t batch_size = 4;
    int64_t marks_per_image = 8;
    std::string manifest;
    uint64_t probe_seed = 777;
    int64_t probe_size = 16;
    int64_t eval_size = 64;
};

struct ScheduleConfig {
    int64_t iterations = 20000;
    double lr = 1e-4;
    std::vector<int64_t> milestones{5000, 10000, 15000};
    double edit_probability = 0.5;
    int64_t checkpoint_every = 1000;
    int64_t log_every = 50;
    int64_t epe_every = 500;
    int64_t e0_steps = 3000;
    int64_t e0_batch = 16;
    double e0_lr = 1e-3;
    int64_t gan_steps = 10000;
    int64_t disc_warmup_steps = 300;
    double fd_threshold = 50.0;
};

struct PathsConfig {
    std::string generator;
    std::string e0;
    std::string model;
};

struct AblationConfig {
    WarpMode warp_mode = WarpMode::Predicted;
};

struct Config {
    ModelConfig model;
    DataConfig data;
    PathsConfig paths;
    LambdaConfig lambdas;
    ScheduleConfig schedule;
    FlowOracleConfig oracle;
    AblationConfig ablation;
    uint64_t seed = 0;
};

/// Strict parse: every key is required; errors name the dotted key path.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);
nlohmann::json to_json(const Config& c);

nlohmann::json model_to_json(const ModelConfig& m);
ModelConfig model_from_json(const nlohmann::json& j, const std::string& prefix = "model");

std::string to_string(WarpMode m);
WarpMode warp_mode_from_string(const std::string& s);

} // namespace warpres
