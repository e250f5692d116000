#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "warpres/dataset.hpp"
#include "warpres/pipeline.hpp"
#include "warpres/plugins.hpp"

namespace warpres {

/// One evaluation result. Serialised as key=value lines.
struct MetricReport {
    std::string protocol;
    int64_t n_samples = 0;
    std::optional<double> fid, ssim, lpips_like, id_score;
    std::map<std::string, double> extras;
    std::string extractor; // fingerprint of the FID / perceptual feature plug-in
    std::string embedder;  // fingerprint of the identity plug-in

    std::string serialize() const;
    static MetricReport parse(const std::string& text);
    bool operator==(const MetricReport&) const = default;
};

/// Frozen feature plug-ins shared by all protocols.
struct EvalPlugins {
    std::shared_ptr<DiscriminatorFeatures> features;
    std::shared_ptr<IdentityEmbedder> embedder;

    static EvalPlugins from_bundle(const GeneratorBundle& b);
};

/// Inverts every image (no edit) and compares the outputs with the inputs.
MetricReport eval_reconstruction(InversionModel& model, const LabeledDataset& ds, EvalPlugins& plugins);

/// Edits the images whose `attribute` label differs from `sign` toward
/// `sign` and compares them with the real images carrying `sign`. When a
/// checker is given, the fraction of edited images it labels `sign` is
/// stored as extras["attribute_accuracy"].
MetricReport eval_edit_attribute(InversionModel& model, const LabeledDataset& ds, const EditDirection& dir,
                                 const std::string& attribute, bool sign, double strength, EvalPlugins& plugins,
                                 const AttributeChecker* checker = nullptr);

/// Edits every image by +strength and -strength. extras holds fid_plus,
/// fid_minus, id_plus, id_minus; fid and id_score are their means.
MetricReport eval_edit_pose(InversionModel& model, const LabeledDataset& ds, const EditDirection& dir, double strength,
                            EvalPlugins& plugins);

/// Pose edit on procedural scenes with an exact target: mse against the
/// re-rendered truth (extras["pose_mse"]), Id between input and edit
/// (id_score) and between truth and edit (extras["id_truth"]).
MetricReport pose_ground_truth_error(InversionModel& model, const ProceduralScenes& scenes, const SceneBatch& batch,
                                     double strength, EvalPlugins& plugins);

/// Mean wall-clock seconds per inversion at batch size 1, excluding `warmup`
/// leading runs.
double measure_runtime(InversionModel& model, const torch::Tensor& images, int64_t n_samples = 2000,
                       int64_t warmup = 5);

} // namespace warpres
