#include "testing.hpp"

#include "helpers.hpp"
#include "warpres/checkpoint.hpp"
#include "warpres/dataset.hpp"
#include "warpres/errors.hpp"
#include "warpres/metrics.hpp"
#include "warpres/protocols.hpp"

using namespace warpres;

namespace {

/// Returns its input for every request.
class PassThrough : public InversionModel {
public:
    torch::Tensor invert(const torch::Tensor& x) override { return x.clone(); }
    torch::Tensor edit(const torch::Tensor& x, const EditDirection&, double) override { return x.clone(); }
};

/// Knows the true codes of a scene batch and edits them exactly.
class LatentOracle : public InversionModel {
public:
    LatentOracle(std::shared_ptr<ProceduralGenerator> gen, const ProceduralScenes& scenes, SceneBatch batch)
        : gen_(std::move(gen)), scenes_(scenes), batch_(std::move(batch)) {}

    torch::Tensor invert(const torch::Tensor& x) override { return x.clone(); }

    torch::Tensor edit(const torch::Tensor& x, const EditDirection& dir, double strength) override {
        std::vector<torch::Tensor> out;
        for (int64_t i = 0; i < x.size(0); ++i) {
            const int64_t k = find(x[i]);
            auto one = batch_.slice(k, 1);
            if (dir.name == "pose") {
                const double sign = (dir.direction * gen_->pose_direction().direction).sum().item<double>() > 0 ? 1 : -1;
                out.push_back(scenes_.pose_truth(one, sign * strength));
            } else {
                auto w = apply_direction(one.w, dir, strength);
                auto detail = scenes_.render_detail(w, one.marks);
                out.push_back(gen_->synthesize_full(w, &detail).image);
            }
        }
        return torch::cat(out);
    }

private:
    int64_t find(const torch::Tensor& img) const {
        for (int64_t k = 0; k < batch_.size(); ++k)
            if (torch::equal(batch_.images[k], img)) return k;
        throw Error("oracle: unknown image");
    }
    std::shared_ptr<ProceduralGenerator> gen_;
    const ProceduralScenes& scenes_;
    SceneBatch batch_;
};

struct Fixture {
    ModelConfig m = test::tiny_model();
    GeneratorBundle bundle = test::tiny_bundle(m, 5);
    std::shared_ptr<ProceduralGenerator> gen = std::dynamic_pointer_cast<ProceduralGenerator>(bundle.gen);
    ProceduralScenes scenes{gen, 4};
    SceneBatch batch = scenes.sample(17, 40);
    LabeledDataset ds = scenes.labeled(batch, Split::Test);
    EvalPlugins plugins = EvalPlugins::from_bundle(bundle);
};

} // namespace

TEST_CASE("pass-through model reconstructs perfectly") {
    Fixture f;
    PassThrough model;
    auto r = eval_reconstruction(model, f.ds, f.plugins);
    CHECK(r.protocol == "reconstruction");
    CHECK(r.n_samples == 40);
    CHECK(*r.fid < 1e-6);
    CHECK(*r.ssim == doctest::Approx(1.0));
    CHECK(*r.lpips_like == 0.0);
    CHECK(*r.id_score == doctest::Approx(1.0));
    CHECK(r.extractor == f.plugins.features->fingerprint());
}

TEST_CASE("a no-op edit scores the plain class-vs-class distance") {
    Fixture f;
    PassThrough model;
    EditDirection zero{torch::zeros({f.m.latent_layers, f.m.latent_dim}), false, "smile", 1.0F};
    auto r = eval_edit_attribute(model, f.ds, zero, "smile", true, 3.0, f.plugins);
    const auto src = f.ds.select("smile", false), dst = f.ds.select("smile", true);
    auto pick = [&](const std::vector<int64_t>& idx) { return f.ds.images.index_select(0, torch::tensor(idx)); };
    auto emb = [&](const torch::Tensor& x) { return f.plugins.features->embedding(x); };
    CHECK(*r.fid == doctest::Approx(frechet_distance(emb(pick(src)), emb(pick(dst)))).epsilon(1e-9));
    CHECK(*r.id_score == doctest::Approx(1.0));
    CHECK(r.n_samples == static_cast<int64_t>(src.size()));
    CHECK_THROWS_AS(eval_edit_attribute(model, f.ds, zero, "hair", true, 1.0, f.plugins), Error);
}

TEST_CASE("latent oracle edits pass the attribute checker") {
    Fixture f;
    LatentOracle model(f.gen, f.scenes, f.batch);
    AttributeChecker checker(*f.gen);
    auto r = eval_edit_attribute(model, f.ds, f.gen->smile_direction(), "smile", true, 3.0, f.plugins, &checker);
    CHECK(r.extras.at("attribute_accuracy") > 0.9);
    auto back = eval_edit_attribute(model, f.ds, f.gen->smile_direction(), "smile", false, 3.0, f.plugins, &checker);
    CHECK(back.extras.at("attribute_accuracy") > 0.9);
}

TEST_CASE("pose protocol: negating the direction swaps the two sides") {
    Fixture f;
    LatentOracle model(f.gen, f.scenes, f.batch);
    auto dir = f.gen->pose_direction();
    auto neg = dir;
    neg.direction = -dir.direction;
    auto a = eval_edit_pose(model, f.ds, dir, 3.0, f.plugins);
    auto b = eval_edit_pose(model, f.ds, neg, 3.0, f.plugins);
    CHECK(a.extras.at("fid_plus") == doctest::Approx(b.extras.at("fid_minus")).epsilon(1e-9));
    CHECK(a.extras.at("id_plus") == doctest::Approx(b.extras.at("id_minus")).epsilon(1e-9));
    CHECK(*a.fid == doctest::Approx(*b.fid).epsilon(1e-9));
    CHECK(*a.fid == doctest::Approx(0.5 * (a.extras.at("fid_plus") + a.extras.at("fid_minus"))));

    PassThrough still;
    auto z = eval_edit_pose(still, f.ds, dir, 3.0, f.plugins);
    CHECK(z.extras.at("fid_plus") < 1e-6);
    CHECK(z.extras.at("id_minus") == doctest::Approx(1.0));
}

TEST_CASE("pose ground truth error is zero for the exact editor") {
    Fixture f;
    LatentOracle model(f.gen, f.scenes, f.batch);
    auto r = pose_ground_truth_error(model, f.scenes, f.batch.slice(0, 8), 4.0, f.plugins);
    CHECK(r.extras.at("pose_mse") == 0.0);
    CHECK(r.extras.at("id_truth") == doctest::Approx(1.0));
    PassThrough still;
    auto s = pose_ground_truth_error(still, f.scenes, f.batch.slice(0, 8), 4.0, f.plugins);
    CHECK(s.extras.at("pose_mse") > 0.0);
}

TEST_CASE("metric reports round-trip through text") {
    MetricReport r;
    r.protocol = "edit_pose";
    r.n_samples = 12;
    r.fid = 0.1 + 0.2;
    r.id_score = -1.0 / 3.0;
    r.extras["fid_plus"] = 1e-300;
    r.extras["pose_mse"] = 12345.678901234567;
    r.extractor = "abc";
    r.embedder = "def";
    auto back = MetricReport::parse(r.serialize());
    CHECK(back == r);
    CHECK_FALSE(back.ssim.has_value());
    CHECK_THROWS_AS(MetricReport::parse("fid=abc\n"), FormatError);
    CHECK_THROWS_AS(MetricReport::parse("colour=1\n"), FormatError);
}

TEST_CASE("evaluation leaves the model untouched") {
    auto c = test::tiny_config();
    auto model = test::tiny_warpres(c);
    Fixture f;
    auto before = module_fingerprint(*model->e1) + module_fingerprint(*model->e2) + module_fingerprint(*model->flow);
    auto sub = f.ds.subset({0, 1, 2, 3, 4, 5});
    eval_reconstruction(*model, sub, f.plugins);
    eval_edit_pose(*model, sub, f.gen->pose_direction(), 2.0, f.plugins);
    auto after = module_fingerprint(*model->e1) + module_fingerprint(*model->e2) + module_fingerprint(*model->flow);
    CHECK(before == after);
}

TEST_CASE("runtime measurement") {
    Fixture f;
    PassThrough model;
    const double s = measure_runtime(model, f.ds.images, 20, 2);
    CHECK(s > 0.0);
    CHECK(s < 0.1);
    CHECK_THROWS_AS(measure_runtime(model, f.ds.images, 0), Error);
}
