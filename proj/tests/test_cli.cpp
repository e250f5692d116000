#include "testing.hpp"

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "warpres/checkpoint.hpp"
#include "warpres/cli.hpp"
#include "warpres/flowwarp.hpp"
#include "warpres/image_io.hpp"
#include "warpres/training.hpp"

using namespace warpres;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"dance"}).code == 2);
    CHECK(cli({"invert", "--out", "x.png"}).code == 2);
    auto help = cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("eval-edit") != std::string::npos);
}

TEST_CASE("a config with a missing key exits with code 3 and names it") {
    auto dir = test::temp_dir("cli_cfg");
    auto j = to_json(test::tiny_config());
    j["model"].erase("flow_width");
    std::ofstream(dir / "c.json") << j.dump();
    auto r = cli({"export-directions", "--config", (dir / "c.json").string(), "--out", (dir / "d").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("model.flow_width") != std::string::npos);
}

TEST_CASE("flow between identical images is zero") {
    auto dir = test::temp_dir("cli_flow");
    torch::manual_seed(3);
    save_png(torch::rand({3, 32, 32}) * 2 - 1, (dir / "a.png").string());
    auto r = cli({"flow", (dir / "a.png").string(), (dir / "a.png").string(), "--out", (dir / "f.flo").string()});
    REQUIRE(r.code == 0);
    auto f = read_flo((dir / "f.flo").string());
    CHECK(f.data.abs().max().item<double>() == 0.0);
    CHECK(std::filesystem::exists(dir / "f.flo.png"));
}

TEST_CASE("dataset and direction export") {
    auto dir = test::temp_dir("cli_data");
    auto j = to_json(test::tiny_config());
    std::ofstream(dir / "c.json") << j.dump();
    const auto cfg = (dir / "c.json").string();
    REQUIRE(cli({"make-dataset", "--config", cfg, "--count", "5", "--out", (dir / "ds").string()}).code == 0);
    CHECK(std::filesystem::exists(dir / "ds" / "labels.csv"));
    REQUIRE(cli({"export-directions", "--config", cfg, "--out", (dir / "dirs").string()}).code == 0);
    auto d = load_direction((dir / "dirs" / "pose.dir").string(), 8, 64);
    CHECK(d.name == "pose");
}

TEST_CASE("edit with strength 0 writes the same pixels as invert") {
    auto dir = test::temp_dir("cli_edit");
    auto c = test::tiny_config();
    auto model = test::tiny_warpres(c);
    Checkpoint ck;
    model->store(ck);
    ck.save((dir / "m.wrck").string());
    auto gen = data_generator(model->bundle);
    save_direction(gen->pose_direction(), (dir / "pose.dir").string());
    ProceduralScenes scenes(gen, 4);
    save_png(scenes.sample(2, 1).images[0], (dir / "in.png").string());

    const auto m = (dir / "m.wrck").string(), in = (dir / "in.png").string();
    REQUIRE(cli({"invert", "--model", m, "--input", in, "--out", (dir / "inv.png").string()}).code == 0);
    REQUIRE(cli({"edit", "--model", m, "--input", in, "--direction", (dir / "pose.dir").string(), "--strength", "0",
                 "--out", (dir / "ed.png").string()})
                .code == 0);
    CHECK(slurp(dir / "inv.png") == slurp(dir / "ed.png"));
    REQUIRE(cli({"edit", "--model", m, "--input", in, "--direction", (dir / "pose.dir").string(), "--strength", "4",
                 "--out", (dir / "ed4.png").string()})
                .code == 0);
    CHECK(slurp(dir / "inv.png") != slurp(dir / "ed4.png"));
}

TEST_CASE("runtime subcommand reports seconds per sample") {
    auto dir = test::temp_dir("cli_runtime");
    auto c = test::tiny_config();
    auto model = test::tiny_warpres(c);
    Checkpoint ck;
    model->store(ck);
    ck.save((dir / "m.wrck").string());
    std::ofstream(dir / "c.json") << to_json(c).dump();
    auto r = cli({"runtime", "--config", (dir / "c.json").string(), "--model", (dir / "m.wrck").string(), "--samples",
                  "3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("seconds_per_sample=") != std::string::npos);
}
