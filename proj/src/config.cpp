#include "warpres/config.hpp"

#include <fstream>
#include <sstream>

namespace warpres {

using nlohmann::json;

LossWeights LossWeights::face_no_edit() { return {0.1, 1.0, 0.001, 0.1, 3.0, 1.0}; }
LossWeights LossWeights::face_cycle() { return {0.1, 0.0, 0.0001, 0.01, 3.0, 1.0}; }
LossWeights LossWeights::car_no_edit() { return {0.1, 1.0, 0.001, 0.5, 3.0, 1.0}; }
LossWeights LossWeights::car_cycle() { return {0.1, 0.0, 0.0001, 0.05, 3.0, 1.0}; }

void FlowOracleConfig::validate() const {
    if (block_size <= 0 || block_size % 2 == 0)
        throw ConfigError("oracle.block_size", "oracle.block_size must be a positive odd integer");
    if (search_radius < 1)
        throw ConfigError("oracle.search_radius", "oracle.search_radius must be >= 1");
    if (stride < 1)
        throw ConfigError("oracle.stride", "oracle.stride must be >= 1");
}

namespace {

const json& require(const json& j, const std::string& section, const std::string& key) {
    const std::string path = section.empty() ? key : section + "." + key;
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(path, "missing config key: " + path);
    return j.at(key);
}

template <typename T>
T get(const json& j, const std::string& section, const std::string& key) {
    const json& v = require(j, section, key);
    const std::string path = section.empty() ? key : section + "." + key;
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path, "config key " + path + " has the wrong type: " + e.what());
    }
}

const json& section(const json& j, const std::string& parent, const std::string& key) {
    const json& s = require(j, parent, key);
    const std::string path = parent.empty() ? key : parent + "." + key;
    if (!s.is_object())
        throw ConfigError(path, "config key " + path + " must be a section");
    return s;
}

LossWeights weights_from(const json& j, const std::string& path) {
    LossWeights w;
    w.a = get<double>(j, path, "a");
    w.r1 = get<double>(j, path, "r1");
    w.r2 = get<double>(j, path, "r2");
    w.r3 = get<double>(j, path, "r3");
    w.f = get<double>(j, path, "f");
    w.fl = get<double>(j, path, "fl");
    for (double v : {w.a, w.r1, w.r2, w.r3, w.f, w.fl})
        if (v < 0.0) throw ConfigError(path, "loss weights under " + path + " must be non-negative");
    return w;
}

json weights_to(const LossWeights& w) {
    return {{"a", w.a}, {"r1", w.r1}, {"r2", w.r2}, {"r3", w.r3}, {"f", w.f}, {"fl", w.fl}};
}

} // namespace

std::string to_string(WarpMode m) {
    switch (m) {
    case WarpMode::Predicted: return "predicted";
    case WarpMode::None: return "none";
    case WarpMode::Oracle: return "oracle";
    }
    return "predicted";
}

WarpMode warp_mode_from_string(const std::string& s) {
    if (s == "predicted") return WarpMode::Predicted;
    if (s == "none") return WarpMode::None;
    if (s == "oracle") return WarpMode::Oracle;
    throw ConfigError("ablation.warp_mode", "unknown warp mode '" + s + "'");
}

json model_to_json(const ModelConfig& m) {
    return {
        {"substrate", m.substrate == Substrate::Procedural ? "procedural" : "gan"},
        {"image_size", m.image_size},
        {"latent_layers", m.latent_layers},
        {"latent_dim", m.latent_dim},
        {"z_dim", m.z_dim},
        {"tap_resolution", m.tap_resolution},
        {"tap_channels", m.tap_channels},
        {"f0_channels", m.f0_channels},
        {"fa_channels", m.fa_channels},
        {"e0_width", m.e0_width},
        {"e1_width", m.e1_width},
        {"e2_width", m.e2_width},
        {"flow_width", m.flow_width},
        {"corr_radius", m.corr_radius},
        {"disc_width", m.disc_width},
        {"ident_width", m.ident_width},
        {"ident_dim", m.ident_dim},
        {"gen_width", m.gen_width},
    };
}

ModelConfig model_from_json(const json& j, const std::string& p) {
    ModelConfig m;
    const auto substrate = get<std::string>(j, p, "substrate");
    if (substrate == "procedural")
        m.substrate = Substrate::Procedural;
    else if (substrate == "gan")
        m.substrate = Substrate::Gan;
    else
        throw ConfigError(p + ".substrate", "unknown substrate '" + substrate + "'");
    m.image_size = get<int64_t>(j, p, "image_size");
    m.latent_layers = get<int64_t>(j, p, "latent_layers");
    m.latent_dim = get<int64_t>(j, p, "latent_dim");
    m.z_dim = get<int64_t>(j, p, "z_dim");
    m.tap_resolution = get<std::array<int64_t, 3>>(j, p, "tap_resolution");
    m.tap_channels = get<std::array<int64_t, 3>>(j, p, "tap_channels");
    m.f0_channels = get<int64_t>(j, p, "f0_channels");
    m.fa_channels = get<int64_t>(j, p, "fa_channels");
    m.e0_width = get<int64_t>(j, p, "e0_width");
    m.e1_width = get<int64_t>(j, p, "e1_width");
    m.e2_width = get<int64_t>(j, p, "e2_width");
    m.flow_width = get<int64_t>(j, p, "flow_width");
    m.corr_radius = get<int64_t>(j, p, "corr_radius");
    m.disc_width = get<int64_t>(j, p, "disc_width");
    m.ident_width = get<int64_t>(j, p, "ident_width");
    m.ident_dim = get<int64_t>(j, p, "ident_dim");
    m.gen_width = get<int64_t>(j, p, "gen_width");

    const auto& r = m.tap_resolution;
    if (!(r[0] > 0 && r[1] == 2 * r[0] && r[2] == 2 * r[1]))
        throw ConfigError(p + ".tap_resolution", "tap resolutions must double at each level");
    if (m.image_size % r[2] != 0)
        throw ConfigError(p + ".image_size", "image size must be a multiple of the finest tap");
    if (r[2] % 8 != 0)
        throw ConfigError(p + ".tap_resolution", "finest tap must be divisible by 8");
    if (m.tap_channels[2] < 4)
        throw ConfigError(p + ".tap_channels", "finest tap needs at least 4 channels");
    if (m.e2_width % 2 != 0)
        throw ConfigError(p + ".e2_width", "e2_width must be even");
    return m;
}

Config parse_config(const json& j) {
    Config c;
    c.model = model_from_json(section(j, "", "model"));

    const json& d = section(j, "", "data");
    c.data.batch_size = get<int64_t>(d, "data", "batch_size");
    c.data.marks_per_image = get<int64_t>(d, "data", "marks_per_image");
    c.data.manifest = get<std::string>(d, "data", "manifest");
    c.data.probe_seed = get<uint64_t>(d, "data", "probe_seed");
    c.data.probe_size = get<int64_t>(d, "data", "probe_size");
    c.data.eval_size = get<int64_t>(d, "data", "eval_size");
    if (c.data.batch_size < 1) throw ConfigError("data.batch_size", "data.batch_size must be >= 1");

    const json& p = section(j, "", "paths");
    c.paths.generator = get<std::string>(p, "paths", "generator");
    c.paths.e0 = get<std::string>(p, "paths", "e0");
    c.paths.model = get<std::string>(p, "paths", "model");

    const json& l = section(j, "", "lambdas");
    c.lambdas.preset = get<std::string>(l, "lambdas", "preset");
    const double flow_weight = get<double>(l, "lambdas", "flow");
    if (flow_weight < 0.0) throw ConfigError("lambdas.flow", "lambdas.flow must be non-negative");
    if (c.lambdas.preset == "face") {
        c.lambdas.no_edit = LossWeights::face_no_edit();
        c.lambdas.cycle = LossWeights::face_cycle();
    } else if (c.lambdas.preset == "car") {
        c.lambdas.no_edit = LossWeights::car_no_edit();
        c.lambdas.cycle = LossWeights::car_cycle();
    } else if (c.lambdas.preset == "custom") {
        c.lambdas.no_edit = weights_from(section(l, "lambdas", "no_edit"), "lambdas.no_edit");
        c.lambdas.cycle = weights_from(section(l, "lambdas", "cycle"), "lambdas.cycle");
    } else {
        throw ConfigError("lambdas.preset", "unknown lambda preset '" + c.lambdas.preset + "'");
    }
    if (c.lambdas.preset != "custom") {
        c.lambdas.no_edit.fl = flow_weight;
        c.lambdas.cycle.fl = flow_weight;
    }

    const json& s = section(j, "", "schedule");
    c.schedule.iterations = get<int64_t>(s, "schedule", "iterations");
    c.schedule.lr = get<double>(s, "schedule", "lr");
    c.schedule.milestones = get<std::vector<int64_t>>(s, "schedule", "milestones");
    c.schedule.edit_probability = get<double>(s, "schedule", "edit_probability");
    c.schedule.checkpoint_every = get<int64_t>(s, "schedule", "checkpoint_every");
    c.schedule.log_every = get<int64_t>(s, "schedule", "log_every");
    c.schedule.epe_every = get<int64_t>(s, "schedule", "epe_every");
    c.schedule.e0_steps = get<int64_t>(s, "schedule", "e0_steps");
    c.schedule.e0_batch = get<int64_t>(s, "schedule", "e0_batch");
    c.schedule.e0_lr = get<double>(s, "schedule", "e0_lr");
    c.schedule.gan_steps = get<int64_t>(s, "schedule", "gan_steps");
    c.schedule.disc_warmup_steps = get<int64_t>(s, "schedule", "disc_warmup_steps");
    c.schedule.fd_threshold = get<double>(s, "schedule", "fd_threshold");
    if (c.schedule.edit_probability < 0.0 || c.schedule.edit_probability > 1.0)
        throw ConfigError("schedule.edit_probability", "schedule.edit_probability must lie in [0, 1]");

    const json& o = section(j, "", "oracle");
    c.oracle.block_size = get<int64_t>(o, "oracle", "block_size");
    c.oracle.search_radius = get<int64_t>(o, "oracle", "search_radius");
    c.oracle.stride = get<int64_t>(o, "oracle", "stride");
    c.oracle.validate();

    const json& a = section(j, "", "ablation");
    c.ablation.warp_mode = warp_mode_from_string(get<std::string>(a, "ablation", "warp_mode"));

    c.seed = get<uint64_t>(j, "", "seed");
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("", "config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const Config& c) {
    json lambdas = {{"preset", c.lambdas.preset}, {"flow", c.lambdas.no_edit.fl}};
    if (c.lambdas.preset == "custom") {
        lambdas["no_edit"] = weights_to(c.lambdas.no_edit);
        lambdas["cycle"] = weights_to(c.lambdas.cycle);
    }
    return {
        {"model", model_to_json(c.model)},
        {"data",
         {{"batch_size", c.data.batch_size},
          {"marks_per_image", c.data.marks_per_image},
          {"manifest", c.data.manifest},
          {"probe_seed", c.data.probe_seed},
          {"probe_size", c.data.probe_size},
          {"eval_size", c.data.eval_size}}},
        {"paths", {{"generator", c.paths.generator}, {"e0", c.paths.e0}, {"model", c.paths.model}}},
        {"lambdas", lambdas},
        {"schedule",
         {{"iterations", c.schedule.iterations},
          {"lr", c.schedule.lr},
          {"milestones", c.schedule.milestones},
          {"edit_probability", c.schedule.edit_probability},
          {"checkpoint_every", c.schedule.checkpoint_every},
          {"log_every", c.schedule.log_every},
          {"epe_every", c.schedule.epe_every},
          {"e0_steps", c.schedule.e0_steps},
          {"e0_batch", c.schedule.e0_batch},
          {"e0_lr", c.schedule.e0_lr},
          {"gan_steps", c.schedule.gan_steps},
          {"disc_warmup_steps", c.schedule.disc_warmup_steps},
          {"fd_threshold", c.schedule.fd_threshold}}},
        {"oracle",
         {{"block_size", c.oracle.block_size},
          {"search_radius", c.oracle.search_radius},
          {"stride", c.oracle.stride}}},
        {"ablation", {{"warp_mode", to_string(c.ablation.warp_mode)}}},
        {"seed", c.seed},
    };
}

} // namespace warpres
