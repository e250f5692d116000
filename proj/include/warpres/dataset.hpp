#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "warpres/generator.hpp"
#include "warpres/latent.hpp"

namespace warpres {

enum class Split { Train, Test };

/// Images plus optional binary attribute labels, iterated in index order.
struct LabeledDataset {
    torch::Tensor images; // [N, 3, S, S] in [-1, 1]
    std::vector<std::string> names;
    std::map<std::string, std::vector<bool>> labels;
    Split split = Split::Test;

    int64_t size() const { return images.defined() ? images.size(0) : 0; }
    bool has_attribute(const std::string& a) const { return labels.count(a) != 0; }
    /// Indices whose label for `attribute` equals `value`.
    std::vector<int64_t> select(const std::string& attribute, bool value) const;
    LabeledDataset subset(const std::vector<int64_t>& idx) const;
};

/// Directory manifest: PNG files plus labels.csv (filename, attribute
/// columns of 0/1). A missing labels.csv loads every *.png unlabelled.
LabeledDataset load_dataset_dir(const std::string& dir, Split split = Split::Test);
void save_dataset_dir(const LabeledDataset& ds, const std::string& dir);

/// Procedural scenes: generator renders plus small sharp "marks" injected
/// into the colour channels of the R64 feature. The marks are what a
/// W+-only inversion cannot reproduce. They sit at fixed offsets from the
/// head centre, so a pose edit moves them along with the object.
struct SceneBatch {
    LatentCode w;          // [N, L, D]
    torch::Tensor marks;   // [N, M, 6]: dx, dy from head centre (canvas px), sigma, rgb
    torch::Tensor detail;  // [N, C64, R, R] injected feature
    torch::Tensor images;  // [N, 3, S, S]

    int64_t size() const { return images.size(0); }
    SceneBatch slice(int64_t start, int64_t length) const;
};

class ProceduralScenes {
public:
    ProceduralScenes(std::shared_ptr<ProceduralGenerator> gen, int64_t marks_per_image);

    /// Deterministic in `seed`.
    SceneBatch sample(uint64_t seed, int64_t n) const;

    /// Exact target for a horizontal pose edit of `strength` image pixels:
    /// the code moves along pose_direction() and the marks move with it.
    torch::Tensor pose_truth(const SceneBatch& s, double strength) const;

    /// Head-centre relative marks rendered onto the injection grid.
    torch::Tensor render_detail(const LatentCode& w, const torch::Tensor& marks, double shift_x_canvas = 0.0) const;

    /// Labelled view: "smile" = mouth above its neutral height, "pose" =
    /// object right of centre.
    LabeledDataset labeled(const SceneBatch& s, Split split) const;

    const ProceduralGenerator& generator() const { return *gen_; }

private:
    std::shared_ptr<ProceduralGenerator> gen_;
    int64_t marks_per_image_;
};

/// Image-only attribute checker for procedural renders. Finds the head and
/// the mouth by exhaustive matched-filter search and compares the mouth's
/// height to the height measured on the neutral render.
class AttributeChecker {
public:
    explicit AttributeChecker(ProceduralGenerator& gen);

    struct Measurement {
        double head_x, head_y, mouth_x, mouth_y; // image px
    };
    Measurement measure(const torch::Tensor& image) const; // [3, S, S]
    bool smiling(const torch::Tensor& image) const;
    /// Fraction of images in [N, 3, S, S] whose smile state equals `expected`.
    double accuracy(const torch::Tensor& images, bool expected) const;

private:
    torch::Tensor head_bias_;
    double neutral_offset_ = 0.0;
    double scale_ = 1.0;
};

} // namespace warpres
