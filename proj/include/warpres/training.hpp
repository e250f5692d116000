#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>

#include <torch/torch.h>

#include "warpres/config.hpp"
#include "warpres/dataset.hpp"
#include "warpres/pipeline.hpp"

namespace warpres {

enum class PathKind { NoEdit, CycleTranslation };
std::string to_string(PathKind p);

/// Learning rate after `step` completed updates: halved at every milestone <= step.
double learning_rate(const ScheduleConfig& s, int64_t step);

/// Training images addressed by an integer key, so a batch depends only on
/// (seed, key) and resumed runs see the same data.
class ImageSource {
public:
    virtual ~ImageSource() = default;
    virtual torch::Tensor batch(uint64_t key, int64_t n) = 0;
};

class SceneSource : public ImageSource {
public:
    SceneSource(std::shared_ptr<ProceduralGenerator> gen, int64_t marks, uint64_t seed);
    torch::Tensor batch(uint64_t key, int64_t n) override { return scenes_.sample(mix(key), n).images; }
    SceneBatch scenes(uint64_t key, int64_t n) const { return scenes_.sample(mix(key), n); }
    const ProceduralScenes& generator() const { return scenes_; }

private:
    uint64_t mix(uint64_t key) const;
    ProceduralScenes scenes_;
    uint64_t seed_;
};

class DirectorySource : public ImageSource {
public:
    DirectorySource(LabeledDataset ds, uint64_t seed) : ds_(std::move(ds)), seed_(seed) {}
    torch::Tensor batch(uint64_t key, int64_t n) override;

private:
    LabeledDataset ds_;
    uint64_t seed_;
};

/// Procedural generator that produces the toy dataset for a bundle: the
/// bundle's own generator in procedural mode, a separate renderer otherwise.
std::shared_ptr<ProceduralGenerator> data_generator(const GeneratorBundle& b);
std::unique_ptr<ImageSource> make_image_source(const Config& cfg, const GeneratorBundle& b);

struct StepRecord {
    int64_t step = 0;
    PathKind path = PathKind::NoEdit;
    double lr = 0.0;
    double adv = 0.0;
    std::optional<double> rec; // absent when the pixel term is skipped
    double perc = 0.0, id = 0.0, feat = 0.0, flow = 0.0;
    double total = 0.0;
    double loss_d = 0.0;
    bool oracle_used = false;
    std::optional<double> epe;

    nlohmann::json to_json() const;
};

/// Owns the optimizers and the RNG of a training run.
class Trainer {
public:
    Trainer(const Config& cfg, WarpResModel& model, ImageSource& data);

    /// One update on the path drawn from the configured edit probability.
    StepRecord step();
    /// One update on a forced path with the given batch.
    StepRecord train_step(const torch::Tensor& x, PathKind path);

    /// Mean endpoint error of the current flow prediction against the oracle
    /// on the held-out probe pairs.
    double probe_epe();

    int64_t current_step() const { return step_; }

    void save(const std::string& path) const;
    void resume(const std::string& path);

    /// Asserts that no frozen parameter holds a gradient.
    void audit_frozen_gradients() const;

private:
    Config cfg_;
    WarpResModel& model_;
    ImageSource& data_;
    std::unique_ptr<torch::optim::Adam> opt_;
    std::unique_ptr<torch::optim::Adam> opt_d_;
    std::mt19937_64 rng_;
    int64_t step_ = 0;

    struct Probe {
        std::array<torch::Tensor, 3> taps_g, taps_e;
        FlowField target;
    };
    std::optional<Probe> probe_;

    LatentCode sample_w_r(int64_t n);
    void set_lr(double lr);
};

struct TrainSummary {
    int64_t steps = 0;
    double epe_start = 0.0, epe_end = 0.0;
    double loss_head = 0.0, loss_tail = 0.0; // mean total over the first / last 100 steps
    bool finite = true;
};

struct TrainOptions {
    std::string out_dir;       // log.jsonl, periodic checkpoints, model.wrck
    std::string resume;        // optional trainer checkpoint
    std::optional<int64_t> iterations;
    std::ostream* console = nullptr;
};

/// Builds the model from the generator and E0 checkpoints named in the
/// config, trains it and writes the final model to cfg.paths.model (or
/// out_dir/model.wrck when unset).
TrainSummary train(const Config& cfg, const TrainOptions& opts);

struct PretrainReport {
    double fd = 0.0;
    double threshold = 0.0;
    bool passed = false;
    double real_score = 0.0, noise_score = 0.0;
    int64_t steps = 0;
    nlohmann::json to_json() const;
};

/// Procedural mode: builds the analytic generator and warms up the
/// discriminator on real scenes against noise. GAN mode: adversarial
/// training of the conv generator on the toy scenes. Writes a checkpoint.
PretrainReport pretrain_generator(const Config& cfg, const std::string& out_path, std::ostream* console = nullptr);

struct E0Report {
    double final_loss = 0.0;
    double center_error_px = -1.0; // procedural substrate only
};

/// Trains E0 to regress W+ codes, then freezes it. Reads the generator
/// checkpoint from cfg.paths.generator; the output checkpoint carries both.
E0Report train_e0(const Config& cfg, const std::string& out_path, std::ostream* console = nullptr);

/// Mean per-blob centre error (image px) of E0 on the given scenes.
double e0_center_error(BaseEncoder& e0, ProceduralGenerator& gen, const SceneBatch& s);

} // namespace warpres
