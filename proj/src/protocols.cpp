#include "warpres/protocols.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "warpres/errors.hpp"
#include "warpres/metrics.hpp"

namespace warpres {

namespace {

constexpr int64_t kChunk = 16;

template <typename Fn>
torch::Tensor chunked(const torch::Tensor& x, Fn fn) {
    std::vector<torch::Tensor> parts;
    for (int64_t i = 0; i < x.size(0); i += kChunk) parts.push_back(fn(x.slice(0, i, std::min(i + kChunk, x.size(0)))));
    return torch::cat(parts);
}

torch::Tensor embedding(EvalPlugins& p, const torch::Tensor& x) {
    torch::NoGradGuard no_grad;
    return chunked(x, [&](const torch::Tensor& c) { return p.features->embedding(c); });
}

double fid(EvalPlugins& p, const torch::Tensor& a, const torch::Tensor& b) {
    return frechet_distance(embedding(p, a), embedding(p, b));
}

MetricReport base_report(const std::string& protocol, int64_t n, const EvalPlugins& p) {
    MetricReport r;
    r.protocol = protocol;
    r.n_samples = n;
    r.extractor = p.features->fingerprint();
    r.embedder = p.embedder->fingerprint();
    return r;
}

torch::Tensor images_of(const LabeledDataset& ds, const std::vector<int64_t>& idx) {
    return ds.images.index_select(0, torch::tensor(idx, torch::kInt64));
}

std::string format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw FormatError("report key '" + key + "' has non-numeric value '" + v + "'");
    }
}

} // namespace

std::string MetricReport::serialize() const {
    std::ostringstream out;
    out << "protocol=" << protocol << '\n' << "n_samples=" << n_samples << '\n';
    const std::pair<const char*, const std::optional<double>*> slots[] = {
        {"fid", &fid}, {"ssim", &ssim}, {"lpips_like", &lpips_like}, {"id_score", &id_score}};
    for (const auto& [k, v] : slots)
        if (*v) out << k << '=' << format(**v) << '\n';
    for (const auto& [k, v] : extras) out << "extra." << k << '=' << format(v) << '\n';
    out << "extractor=" << extractor << '\n' << "embedder=" << embedder << '\n';
    return out.str();
}

MetricReport MetricReport::parse(const std::string& text) {
    MetricReport r;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("report line without '=': " + line);
        const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
        if (k == "protocol")
            r.protocol = v;
        else if (k == "n_samples")
            r.n_samples = static_cast<int64_t>(parse_double(k, v));
        else if (k == "fid")
            r.fid = parse_double(k, v);
        else if (k == "ssim")
            r.ssim = parse_double(k, v);
        else if (k == "lpips_like")
            r.lpips_like = parse_double(k, v);
        else if (k == "id_score")
            r.id_score = parse_double(k, v);
        else if (k.rfind("extra.", 0) == 0)
            r.extras[k.substr(6)] = parse_double(k, v);
        else if (k == "extractor")
            r.extractor = v;
        else if (k == "embedder")
            r.embedder = v;
        else
            throw FormatError("unknown report key '" + k + "'");
    }
    return r;
}

EvalPlugins EvalPlugins::from_bundle(const GeneratorBundle& b) {
    return {std::make_shared<DiscriminatorFeatures>(b.disc), b.embedder};
}

MetricReport eval_reconstruction(InversionModel& model, const LabeledDataset& ds, EvalPlugins& plugins) {
    if (ds.size() < 2) throw Error("eval_reconstruction needs at least 2 images");
    torch::NoGradGuard no_grad;
    auto out = chunked(ds.images, [&](const torch::Tensor& c) { return model.invert(c); });
    auto r = base_report("reconstruction", ds.size(), plugins);
    r.fid = fid(plugins, out, ds.images);
    r.ssim = ssim(out, ds.images);
    r.lpips_like = perceptual_distance(out, ds.images, *plugins.features);
    r.id_score = id_score(out, ds.images, *plugins.embedder);
    return r;
}

MetricReport eval_edit_attribute(InversionModel& model, const LabeledDataset& ds, const EditDirection& dir,
                                 const std::string& attribute, bool sign, double strength, EvalPlugins& plugins,
                                 const AttributeChecker* checker) {
    if (!ds.has_attribute(attribute)) throw Error("dataset has no labels for attribute '" + attribute + "'");
    const auto src = ds.select(attribute, !sign), dst = ds.select(attribute, sign);
    if (src.size() < 2 || dst.size() < 2)
        throw Error("attribute '" + attribute + "' needs at least 2 images in each label class");
    torch::NoGradGuard no_grad;
    auto x = images_of(ds, src);
    const double s = sign ? strength : -strength;
    auto edited = chunked(x, [&](const torch::Tensor& c) { return model.edit(c, dir, s); });
    auto r = base_report("edit_attribute:" + attribute + (sign ? ":+" : ":-"), static_cast<int64_t>(src.size()),
                         plugins);
    r.fid = fid(plugins, edited, images_of(ds, dst));
    r.id_score = id_score(edited, x, *plugins.embedder);
    if (checker != nullptr) r.extras["attribute_accuracy"] = checker->accuracy(edited, sign);
    return r;
}

MetricReport eval_edit_pose(InversionModel& model, const LabeledDataset& ds, const EditDirection& dir, double strength,
                            EvalPlugins& plugins) {
    if (ds.size() < 2) throw Error("eval_edit_pose needs at least 2 images");
    torch::NoGradGuard no_grad;
    auto plus = chunked(ds.images, [&](const torch::Tensor& c) { return model.edit(c, dir, strength); });
    auto minus = chunked(ds.images, [&](const torch::Tensor& c) { return model.edit(c, dir, -strength); });
    auto r = base_report("edit_pose", ds.size(), plugins);
    auto real = embedding(plugins, ds.images);
    r.extras["fid_plus"] = frechet_distance(embedding(plugins, plus), real);
    r.extras["fid_minus"] = frechet_distance(embedding(plugins, minus), real);
    r.extras["id_plus"] = id_score(plus, ds.images, *plugins.embedder);
    r.extras["id_minus"] = id_score(minus, ds.images, *plugins.embedder);
    r.fid = 0.5 * (r.extras["fid_plus"] + r.extras["fid_minus"]);
    r.id_score = 0.5 * (r.extras["id_plus"] + r.extras["id_minus"]);
    return r;
}

MetricReport pose_ground_truth_error(InversionModel& model, const ProceduralScenes& scenes, const SceneBatch& batch,
                                     double strength, EvalPlugins& plugins) {
    torch::NoGradGuard no_grad;
    const auto dir = scenes.generator().pose_direction();
    auto edited = chunked(batch.images, [&](const torch::Tensor& c) { return model.edit(c, dir, strength); });
    auto truth = scenes.pose_truth(batch, strength);
    auto r = base_report("pose_ground_truth", batch.size(), plugins);
    r.extras["pose_mse"] = (edited - truth).pow(2).mean().item<double>();
    r.extras["id_truth"] = id_score(edited, truth, *plugins.embedder);
    r.id_score = id_score(edited, batch.images, *plugins.embedder);
    r.ssim = ssim(edited, truth);
    return r;
}

double measure_runtime(InversionModel& model, const torch::Tensor& images, int64_t n_samples, int64_t warmup) {
    if (n_samples < 1) throw Error("measure_runtime needs n_samples >= 1");
    if (images.size(0) < 1) throw Error("measure_runtime needs at least one image");
    torch::NoGradGuard no_grad;
    auto one = [&](int64_t i) { return images.slice(0, i % images.size(0), i % images.size(0) + 1); };
    for (int64_t i = 0; i < warmup; ++i) model.invert(one(i));
    const auto t0 = std::chrono::steady_clock::now();
    for (int64_t i = 0; i < n_samples; ++i) model.invert(one(i));
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s / static_cast<double>(n_samples);
}

} // namespace warpres
