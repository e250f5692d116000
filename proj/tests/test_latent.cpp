#include "testing.hpp"

#include <cmath>

#include "helpers.hpp"
#include "warpres/errors.hpp"
#include "warpres/latent.hpp"

using namespace warpres;

namespace {

LatentCode code(std::vector<float> v) { return {torch::tensor(v).view({1, -1})}; }

} // namespace

TEST_CASE("sample_z is a pure function of the seed") {
    auto a = sample_z(42), b = sample_z(42), c = sample_z(43);
    CHECK(torch::equal(a.z, b.z));
    CHECK_FALSE(torch::equal(a.z, c.z));
    CHECK(a.z.size(0) == 64);
}

TEST_CASE("sample_z moments over many seeds") {
    std::vector<torch::Tensor> zs;
    for (uint64_t s = 0; s < 10000; ++s) zs.push_back(sample_z(s).z.to(torch::kFloat64));
    auto all = torch::stack(zs).flatten();
    const double n = static_cast<double>(all.numel());
    const double mean = all.mean().item<double>(), var = all.var().item<double>();
    CHECK(std::abs(mean) < 3.0 / std::sqrt(n));
    // var of the sample variance of N(0,1) is 2/n
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("mapping network is deterministic, injective on samples and shaped L x D") {
    torch::manual_seed(0);
    MappingNetwork m(64, 64, 8);
    auto z1 = sample_z(1).z, z2 = sample_z(2).z;
    auto w1 = m->map(z1), w1b = m->map(z1), w2 = m->map(z2);
    CHECK(torch::equal(w1.codes, w1b.codes));
    CHECK_FALSE(torch::equal(w1.codes, w2.codes));
    CHECK(w1.codes.sizes() == torch::IntArrayRef({8, 64}));
    CHECK_THROWS_AS(m->map(torch::zeros({3, 10})), ShapeError);
}

TEST_CASE("simulate_edit endpoints and midpoint") {
    auto w = code({0, 2}), wr = code({2, 0});
    CHECK(torch::equal(simulate_edit(w, wr, 0.0).codes, w.codes));
    CHECK(torch::equal(simulate_edit(w, wr, 1.0).codes, wr.codes));
    CHECK(torch::allclose(simulate_edit(w, wr, 0.5).codes, code({1, 1}).codes));
    CHECK_THROWS_AS(simulate_edit(w, code({1, 2, 3}), 0.5), ShapeError);
}

TEST_CASE("simulate_edit accepts one alpha per batch entry") {
    auto w = LatentCode{torch::zeros({2, 1, 2})}, wr = LatentCode{torch::ones({2, 1, 2})};
    auto out = simulate_edit(w, wr, torch::tensor({0.25f, 0.75f}));
    CHECK(out.codes[0][0][0].item<float>() == doctest::Approx(0.25));
    CHECK(out.codes[1][0][1].item<float>() == doctest::Approx(0.75));
    CHECK_THROWS_AS(simulate_edit(w, wr, torch::tensor({0.1f, 0.2f, 0.3f})), ShapeError);
}

TEST_CASE("sample_edit_alpha distribution") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) CHECK(sample_edit_alpha(rng, 0.0) == 0.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = sample_edit_alpha(rng, 1.0);
        CHECK(a > 0.4);
        CHECK(a < 0.5);
    }
    int zeros = 0;
    for (int i = 0; i < 10000; ++i) zeros += sample_edit_alpha(rng, 0.5) == 0.0;
    CHECK(zeros / 10000.0 == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("reverse_edit undoes simulate_edit on raw codes") {
    auto w = code({1, 1}), wr = code({3, 1});
    auto fwd = simulate_edit(w, wr, 0.5);
    CHECK(torch::allclose(fwd.codes, code({2, 1}).codes));
    LatentCode dir{wr.codes - w.codes};
    CHECK(torch::allclose(reverse_edit(fwd, dir, 0.5).codes, w.codes));
    CHECK(torch::equal(reverse_edit(fwd, dir, 0.0).codes, fwd.codes));

    torch::manual_seed(4);
    for (int i = 0; i < 20; ++i) {
        LatentCode a{torch::randn({8, 64})}, b{torch::randn({8, 64})};
        const double alpha = 0.4 + 0.1 * torch::rand({1}).item<double>();
        auto back = reverse_edit(simulate_edit(a, b, alpha), LatentCode{b.codes - a.codes}, alpha);
        CHECK((back.codes - a.codes).abs().max().item<double>() < 1e-6);
    }
}

TEST_CASE("apply_direction is a one-parameter group") {
    torch::manual_seed(5);
    LatentCode w{torch::randn({8, 64})};
    EditDirection d{torch::randn({8, 64}), false, "d", 1.0F};
    CHECK(torch::equal(apply_direction(w, d, 0.0).codes, w.codes));
    auto twice = apply_direction(apply_direction(w, d, 0.7), d, 1.1);
    CHECK(torch::allclose(twice.codes, apply_direction(w, d, 1.8).codes, 1e-5, 1e-6));
    auto back = apply_direction(apply_direction(w, d, 2.5), d, -2.5);
    CHECK((back.codes - w.codes).abs().max().item<double>() < 1e-6);
}

TEST_CASE("direction files round-trip and validate") {
    auto dir = test::temp_dir("direction");
    torch::manual_seed(6);
    EditDirection d{torch::randn({8, 64}), false, "smile", 3.0F};
    save_direction(d, (dir / "d.dir").string());
    auto back = load_direction((dir / "d.dir").string(), 8, 64);
    CHECK(torch::equal(back.direction, d.direction));
    CHECK(back.name == "smile");
    CHECK(back.default_strength == 3.0F);
    CHECK_THROWS_AS(load_direction((dir / "d.dir").string(), 8, 32), ShapeError);

    EditDirection bc{torch::randn({1, 64}), true, "b", 1.0F};
    save_direction(bc, (dir / "b.dir").string());
    auto lb = load_direction((dir / "b.dir").string(), 8, 64);
    CHECK(lb.broadcast);
    auto eff = lb.effective(8);
    CHECK(eff.sizes() == torch::IntArrayRef({8, 64}));
    for (int l = 0; l < 8; ++l) CHECK(torch::equal(eff[l], bc.direction[0]));
    LatentCode w{torch::zeros({8, 64})};
    CHECK(torch::equal(apply_direction(w, lb, 1.0).codes, eff));
}
