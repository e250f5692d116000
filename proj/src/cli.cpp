#include "warpres/cli.hpp"

#include <filesystem>
#include <fstream>

#include <CLI11.hpp>

#include "warpres/errors.hpp"
#include "warpres/image_io.hpp"
#include "warpres/protocols.hpp"
#include "warpres/training.hpp"

namespace warpres {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* sub, Common& c, bool out_required) {
    sub->add_option("--config", c.config, "JSON config file");
    sub->add_option("--seed", c.seed, "override the config seed");
    auto* o = sub->add_option("--out", c.out, "output path");
    if (out_required) o->required();
}

Config resolve(const Common& c) {
    Config cfg = c.config.empty() ? Config{} : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

/// A PNG file becomes a batch of one; a directory loads as a dataset.
torch::Tensor load_images(const std::string& path) {
    if (fs::is_directory(path)) return load_dataset_dir(path).images;
    return load_png(path).unsqueeze(0);
}

void write_images(const torch::Tensor& images, const std::string& out) {
    if (images.size(0) == 1) {
        save_png(images[0], out);
        return;
    }
    fs::create_directories(out);
    for (int64_t i = 0; i < images.size(0); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img_%05lld.png", static_cast<long long>(i));
        save_png(images[i], (fs::path(out) / name).string());
    }
}

void write_report(const MetricReport& r, const std::string& out, std::ostream& console) {
    console << r.serialize();
    if (out.empty()) return;
    std::ofstream f(out);
    if (!f) throw IoError("cannot write report " + out);
    f << r.serialize();
}

/// Test split of the procedural dataset unless a directory is given.
LabeledDataset eval_dataset(const std::string& dir, const Config& cfg, const GeneratorBundle& b) {
    if (!dir.empty()) return load_dataset_dir(dir, Split::Test);
    ProceduralScenes scenes(data_generator(b), cfg.data.marks_per_image);
    return scenes.labeled(scenes.sample(cfg.seed ^ 0x7465737453ULL, cfg.data.eval_size), Split::Test);
}

std::shared_ptr<ProceduralGenerator> procedural_from(const std::string& generator_path, const Config& cfg) {
    if (!generator_path.empty()) return data_generator(load_generator_bundle(Checkpoint::load(generator_path)));
    auto gen = std::make_shared<ProceduralGenerator>(cfg.model, cfg.seed);
    gen->freeze();
    return gen;
}

std::optional<WarpMode> mode_option(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return warp_mode_from_string(s);
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"warp-aligned residual features for GAN inversion and editing", "warpres"};
    app.require_subcommand(1);
    Common c;

    auto* pre = app.add_subcommand("pretrain-generator", "build the frozen generator and its discriminator");
    add_common(pre, c, true);

    std::string generator_path;
    auto* e0 = app.add_subcommand("train-e0", "train the base W+ encoder");
    add_common(e0, c, true);
    e0->add_option("--generator", generator_path, "generator checkpoint (overrides paths.generator)");

    std::string resume, warp_mode;
    std::optional<int64_t> iterations;
    auto* tr = app.add_subcommand("train", "train residual encoders and flow net");
    add_common(tr, c, true);
    tr->add_option("--resume", resume, "trainer checkpoint to continue from");
    tr->add_option("--iterations", iterations, "override schedule.iterations");
    tr->add_option("--warp-mode", warp_mode, "predicted | none | oracle");

    std::string model_path, input, direction, grid, data_dir, protocol = "attribute", attribute = "smile";
    double strength = 1.0;
    bool sign = true;
    auto* inv = app.add_subcommand("invert", "reconstruct images");
    add_common(inv, c, true);
    inv->add_option("--model", model_path)->required();
    inv->add_option("--input", input, "PNG file or dataset directory")->required();

    auto* ed = app.add_subcommand("edit", "edit images along a W+ direction");
    add_common(ed, c, true);
    ed->add_option("--model", model_path)->required();
    ed->add_option("--input", input, "PNG file or dataset directory")->required();
    ed->add_option("--direction", direction, "direction file")->required();
    ed->add_option("--strength", strength);
    ed->add_option("--grid", grid, "also write an input/edit grid PNG");

    auto* er = app.add_subcommand("eval-recon", "reconstruction metrics");
    add_common(er, c, false);
    er->add_option("--model", model_path)->required();
    er->add_option("--data", data_dir, "dataset directory (default: procedural test scenes)");

    auto* ee = app.add_subcommand("eval-edit", "editing metrics");
    add_common(ee, c, false);
    ee->add_option("--model", model_path)->required();
    ee->add_option("--data", data_dir, "dataset directory (default: procedural test scenes)");
    ee->add_option("--direction", direction, "direction file")->required();
    ee->add_option("--protocol", protocol, "attribute | pose")->check(CLI::IsMember({"attribute", "pose"}));
    ee->add_option("--attribute", attribute);
    ee->add_option("--sign", sign, "edit toward label 1 (true) or 0 (false)");
    ee->add_option("--strength", strength);

    std::string image_a, image_b;
    auto* fl = app.add_subcommand("flow", "flow between two images (.flo plus colour PNG)");
    add_common(fl, c, true);
    fl->add_option("image_a", image_a, "edited image")->required();
    fl->add_option("image_b", image_b, "unedited image")->required();

    int64_t samples = 2000;
    auto* rt = app.add_subcommand("runtime", "seconds per inversion at batch size 1");
    add_common(rt, c, false);
    rt->add_option("--model", model_path)->required();
    rt->add_option("--samples", samples);

    int64_t count = 64;
    std::string split = "test";
    auto* md = app.add_subcommand("make-dataset", "write procedural scenes with labels.csv");
    add_common(md, c, true);
    md->add_option("--generator", generator_path, "generator checkpoint (default: a fresh procedural one)");
    md->add_option("--count", count);
    md->add_option("--split", split)->check(CLI::IsMember({"train", "test"}));

    auto* dirs = app.add_subcommand("export-directions", "write pose.dir and smile.dir");
    add_common(dirs, c, true);
    dirs->add_option("--generator", generator_path, "generator checkpoint (default: a fresh procedural one)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        Config cfg = resolve(c);
        if (pre->parsed()) {
            auto r = pretrain_generator(cfg, c.out, &out);
            out << r.to_json().dump() << '\n';
            if (!r.passed) {
                err << "generator check failed: fd " << r.fd << " >= threshold " << r.threshold << '\n';
                return 1;
            }
        } else if (e0->parsed()) {
            if (!generator_path.empty()) cfg.paths.generator = generator_path;
            auto r = train_e0(cfg, c.out, &out);
            out << "final_loss=" << r.final_loss << " center_error_px=" << r.center_error_px << '\n';
        } else if (tr->parsed()) {
            if (auto m = mode_option(warp_mode)) cfg.ablation.warp_mode = *m;
            TrainOptions o{c.out, resume, iterations, &out};
            auto s = train(cfg, o);
            out << "steps=" << s.steps << " epe_start=" << s.epe_start << " epe_end=" << s.epe_end
                << " loss_head=" << s.loss_head << " loss_tail=" << s.loss_tail << '\n';
        } else if (inv->parsed()) {
            auto m = WarpResModel::load(model_path);
            write_images(m->invert(load_images(input)), c.out);
        } else if (ed->parsed()) {
            auto m = WarpResModel::load(model_path);
            auto d = load_direction(direction, m->model.latent_layers, m->model.latent_dim);
            auto x = load_images(input);
            auto y = m->edit(x, d, strength);
            write_images(y, c.out);
            if (!grid.empty()) save_grid(torch::cat({x, y}), grid, x.size(0));
        } else if (er->parsed()) {
            auto m = WarpResModel::load(model_path);
            auto plugins = EvalPlugins::from_bundle(m->bundle);
            write_report(eval_reconstruction(*m, eval_dataset(data_dir, cfg, m->bundle), plugins), c.out, out);
        } else if (ee->parsed()) {
            auto m = WarpResModel::load(model_path);
            auto plugins = EvalPlugins::from_bundle(m->bundle);
            auto ds = eval_dataset(data_dir, cfg, m->bundle);
            auto d = load_direction(direction, m->model.latent_layers, m->model.latent_dim);
            MetricReport r;
            if (protocol == "pose") {
                r = eval_edit_pose(*m, ds, d, strength, plugins);
            } else {
                auto proc = data_generator(m->bundle);
                std::optional<AttributeChecker> checker;
                if (attribute == "smile" && data_dir.empty()) checker.emplace(*proc);
                r = eval_edit_attribute(*m, ds, d, attribute, sign, strength, plugins, checker ? &*checker : nullptr);
            }
            write_report(r, c.out, out);
        } else if (fl->parsed()) {
            auto a = load_png(image_a).unsqueeze(0), b = load_png(image_b).unsqueeze(0);
            auto f = pseudo_gt_flow(a, b, cfg.oracle);
            write_flo(f, c.out);
            save_png_u8(flow_to_color(f), c.out + ".png");
        } else if (rt->parsed()) {
            auto m = WarpResModel::load(model_path);
            auto ds = eval_dataset("", cfg, m->bundle);
            const double s = measure_runtime(*m, ds.images, samples);
            out << "seconds_per_sample=" << s << '\n';
            if (!c.out.empty()) std::ofstream(c.out) << "seconds_per_sample=" << s << '\n';
        } else if (md->parsed()) {
            auto gen = procedural_from(generator_path, cfg);
            ProceduralScenes scenes(gen, cfg.data.marks_per_image);
            const Split sp = split == "train" ? Split::Train : Split::Test;
            save_dataset_dir(scenes.labeled(scenes.sample(cfg.seed, count), sp), c.out);
        } else if (dirs->parsed()) {
            auto gen = procedural_from(generator_path, cfg);
            fs::create_directories(c.out);
            save_direction(gen->pose_direction(), (fs::path(c.out) / "pose.dir").string());
            save_direction(gen->smile_direction(), (fs::path(c.out) / "smile.dir").string());
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace warpres
