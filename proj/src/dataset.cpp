#include "warpres/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "warpres/errors.hpp"
#include "warpres/image_io.hpp"

namespace warpres {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

std::vector<int64_t> LabeledDataset::select(const std::string& attribute, bool value) const {
    auto it = labels.find(attribute);
    if (it == labels.end()) throw Error("dataset has no attribute '" + attribute + "'");
    std::vector<int64_t> idx;
    for (std::size_t i = 0; i < it->second.size(); ++i)
        if (it->second[i] == value) idx.push_back(static_cast<int64_t>(i));
    return idx;
}

LabeledDataset LabeledDataset::subset(const std::vector<int64_t>& idx) const {
    LabeledDataset out;
    out.split = split;
    out.images = images.index_select(0, torch::tensor(idx, torch::kInt64));
    for (auto i : idx) out.names.push_back(names.at(static_cast<std::size_t>(i)));
    for (const auto& [k, v] : labels) {
        std::vector<bool> sub;
        for (auto i : idx) sub.push_back(v.at(static_cast<std::size_t>(i)));
        out.labels[k] = sub;
    }
    return out;
}

LabeledDataset load_dataset_dir(const std::string& dir, Split split) {
    if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
    LabeledDataset ds;
    ds.split = split;
    std::vector<torch::Tensor> imgs;
    const auto csv = fs::path(dir) / "labels.csv";
    if (fs::exists(csv)) {
        std::ifstream in(csv);
        std::string line;
        if (!std::getline(in, line)) throw FormatError("empty labels.csv in " + dir);
        std::vector<std::string> header;
        {
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) header.push_back(cell);
        }
        if (header.empty() || header[0] != "filename") throw FormatError("labels.csv must start with a filename column");
        int64_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() != header.size())
                throw FormatError("labels.csv row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                  " columns, expected " + std::to_string(header.size()));
            ds.names.push_back(cells[0]);
            imgs.push_back(load_png((fs::path(dir) / cells[0]).string()));
            for (std::size_t c = 1; c < header.size(); ++c) {
                if (cells[c] != "0" && cells[c] != "1")
                    throw FormatError("labels.csv row " + std::to_string(row) + ": label must be 0 or 1");
                ds.labels[header[c]].push_back(cells[c] == "1");
            }
        }
    } else {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".png") files.push_back(e.path().filename().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            ds.names.push_back(f);
            imgs.push_back(load_png((fs::path(dir) / f).string()));
        }
    }
    if (imgs.empty()) throw Error("dataset directory has no images: " + dir);
    ds.images = torch::stack(imgs);
    return ds;
}

void save_dataset_dir(const LabeledDataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream csv(fs::path(dir) / "labels.csv");
    if (!csv) throw IoError("cannot write labels.csv in " + dir);
    csv << "filename";
    for (const auto& [k, v] : ds.labels) csv << ',' << k;
    csv << '\n';
    for (int64_t i = 0; i < ds.size(); ++i) {
        const auto& name = ds.names.at(static_cast<std::size_t>(i));
        save_png(ds.images[i], (fs::path(dir) / name).string());
        csv << name;
        for (const auto& [k, v] : ds.labels) csv << ',' << (v[static_cast<std::size_t>(i)] ? 1 : 0);
        csv << '\n';
    }
}

// ---------------------------------------------------------------------------

SceneBatch SceneBatch::slice(int64_t start, int64_t length) const {
    return {{w.codes.narrow(0, start, length)}, marks.narrow(0, start, length), detail.narrow(0, start, length),
            images.narrow(0, start, length)};
}

ProceduralScenes::ProceduralScenes(std::shared_ptr<ProceduralGenerator> gen, int64_t marks_per_image)
    : gen_(std::move(gen)), marks_per_image_(marks_per_image) {}

SceneBatch ProceduralScenes::sample(uint64_t seed, int64_t n) const {
    torch::NoGradGuard no_grad;
    const auto& cfg = gen_->config();
    auto tgen = at::make_generator<at::CPUGeneratorImpl>(seed);
    auto z = torch::randn({n, cfg.z_dim}, tgen);
    SceneBatch s;
    s.w = gen_->mapping()->map(z);

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int64_t m = marks_per_image_;
    s.marks = torch::empty({n, m, 6});
    auto acc = s.marks.accessor<float, 3>();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) {
            const double r = 9.0 * std::sqrt(unit(rng)), a = 2.0 * M_PI * unit(rng);
            acc[i][j][0] = static_cast<float>(r * std::cos(a));
            acc[i][j][1] = static_cast<float>(r * std::sin(a));
            acc[i][j][2] = static_cast<float>(0.5 + 0.3 * unit(rng));
            double c[3], norm = 0.0;
            for (auto& v : c) {
                v = normal(rng);
                norm += v * v;
            }
            const double amp = (1.0 + 0.6 * unit(rng)) / std::sqrt(std::max(norm, 1e-12));
            for (int k = 0; k < 3; ++k) acc[i][j][3 + k] = static_cast<float>(c[k] * amp);
        }
    s.detail = render_detail(s.w, s.marks);
    s.images = gen_->synthesize_full(s.w, &s.detail).image;
    return s;
}

torch::Tensor ProceduralScenes::render_detail(const LatentCode& w, const torch::Tensor& marks,
                                              double shift_x_canvas) const {
    const auto& cfg = gen_->config();
    const int64_t res = cfg.injection_resolution();
    // Head centre back on the 64 px canvas.
    const double s = gen_->pixel_scale();
    auto head = (gen_->blob_centers(w).select(1, 0) + 0.5) / s - 0.5; // [N, 2]
    auto cx = (head.select(1, 0).unsqueeze(1) + shift_x_canvas + marks.select(2, 0)).unsqueeze(-1).unsqueeze(-1);
    auto cy = (head.select(1, 1).unsqueeze(1) + marks.select(2, 1)).unsqueeze(-1).unsqueeze(-1);
    auto sig = marks.select(2, 2).unsqueeze(-1).unsqueeze(-1);
    auto coord = (torch::arange(res, marks.options()) + 0.5) * (64.0 / static_cast<double>(res)) - 0.5;
    auto dx = (coord.view({1, 1, 1, res}) - cx) / sig;
    auto dy = (coord.view({1, 1, res, 1}) - cy) / sig;
    auto g = torch::exp(-0.5 * (dx * dx + dy * dy));
    auto rgb = torch::einsum("nmc,nmyx->ncyx", {marks.narrow(2, 3, 3), g});
    return F::pad(rgb, F::PadFuncOptions({0, 0, 0, 0, 0, cfg.injection_channels() - 3}));
}

torch::Tensor ProceduralScenes::pose_truth(const SceneBatch& s, double strength) const {
    torch::NoGradGuard no_grad;
    const auto dir = gen_->pose_direction(0);
    auto w = apply_direction(s.w, dir, strength);
    auto detail = render_detail(w, s.marks, 0.0);
    return gen_->synthesize_full(w, &detail).image;
}

LabeledDataset ProceduralScenes::labeled(const SceneBatch& s, Split split) const {
    torch::NoGradGuard no_grad;
    LabeledDataset ds;
    ds.split = split;
    ds.images = s.images;
    auto p = gen_->style_params(s.w.codes);
    auto mouth = p.select(1, ProceduralGenerator::param_index("mouth", 1));
    auto ox = p.select(1, ProceduralGenerator::offset_index(0));
    for (int64_t i = 0; i < s.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05lld.png", static_cast<long long>(i));
        ds.names.emplace_back(name);
        ds.labels["smile"].push_back(mouth[i].item<float>() < 0.0F);
        ds.labels["pose"].push_back(ox[i].item<float>() > 0.0F);
    }
    return ds;
}

// ---------------------------------------------------------------------------

namespace {

torch::Tensor gaussian_kernel(double sigma_x, double sigma_y) {
    const int64_t rx = static_cast<int64_t>(std::ceil(3.0 * sigma_x)), ry = static_cast<int64_t>(std::ceil(3.0 * sigma_y));
    auto x = torch::arange(-rx, rx + 1, torch::kFloat64);
    auto y = torch::arange(-ry, ry + 1, torch::kFloat64);
    auto k = torch::exp(-0.5 * (x.pow(2).view({1, -1}) / (sigma_x * sigma_x) + y.pow(2).view({-1, 1}) / (sigma_y * sigma_y)));
    return (k / k.sum()).view({1, 1, 2 * ry + 1, 2 * rx + 1});
}

torch::Tensor filter(const torch::Tensor& plane, const torch::Tensor& kernel) {
    return F::conv2d(plane.view({1, 1, plane.size(0), plane.size(1)}), kernel,
                     F::Conv2dFuncOptions().padding({kernel.size(2) / 2, kernel.size(3) / 2}))
        .view({plane.size(0), plane.size(1)});
}

} // namespace

AttributeChecker::AttributeChecker(ProceduralGenerator& gen) {
    torch::NoGradGuard no_grad;
    head_bias_ = torch::tensor({-0.7, -0.6, -0.5}, torch::kFloat64);
    scale_ = gen.pixel_scale();
    const auto& cfg = gen.config();
    auto neutral = gen.synthesize({torch::zeros({cfg.latent_layers, cfg.latent_dim})}).image[0];
    const auto m = measure(neutral);
    neutral_offset_ = m.mouth_y - m.head_y;
}

AttributeChecker::Measurement AttributeChecker::measure(const torch::Tensor& image) const {
    torch::NoGradGuard no_grad;
    auto x = image.detach().to(torch::kFloat64).clamp(-0.999, 0.999);
    auto feat = torch::atanh(x) - head_bias_.view({3, 1, 1});
    const int64_t h = feat.size(1), w = feat.size(2);

    auto head_map = filter(feat[0], gaussian_kernel(11.0 * scale_, 11.0 * scale_));
    const auto hi = head_map.argmax().item<int64_t>();
    Measurement m{};
    m.head_x = static_cast<double>(hi % w);
    m.head_y = static_cast<double>(hi / w);

    // Mouth search below the eyes, blue minus red as the response.
    // Difference of Gaussians removes the slowly varying head colour under the mouth.
    auto blue = feat[2] - feat[0];
    auto mouth_map = filter(blue, gaussian_kernel(6.3 * scale_, 3.5 * scale_)) -
                     filter(blue, gaussian_kernel(12.0 * scale_, 9.0 * scale_));
    double best = -1e300;
    const auto y0 = static_cast<int64_t>(m.head_y + 1.0 * scale_), y1 = static_cast<int64_t>(m.head_y + 22.0 * scale_);
    const auto x0 = static_cast<int64_t>(m.head_x - 8.0 * scale_), x1 = static_cast<int64_t>(m.head_x + 8.0 * scale_);
    auto acc = mouth_map.accessor<double, 2>();
    for (int64_t y = std::max<int64_t>(0, y0); y <= std::min(h - 1, y1); ++y)
        for (int64_t xx = std::max<int64_t>(0, x0); xx <= std::min(w - 1, x1); ++xx)
            if (acc[y][xx] > best) {
                best = acc[y][xx];
                m.mouth_x = static_cast<double>(xx);
                m.mouth_y = static_cast<double>(y);
            }
    return m;
}

bool AttributeChecker::smiling(const torch::Tensor& image) const {
    const auto m = measure(image);
    return m.mouth_y - m.head_y < neutral_offset_;
}

double AttributeChecker::accuracy(const torch::Tensor& images, bool expected) const {
    if (images.size(0) == 0) throw Error("accuracy over an empty image set");
    int64_t hits = 0;
    for (int64_t i = 0; i < images.size(0); ++i) hits += smiling(images[i]) == expected ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(images.size(0));
}

} // namespace warpres
