#include "testing.hpp"

#include <cmath>

#include "helpers.hpp"
#include "warpres/metrics.hpp"

using namespace warpres;

namespace {

Eigen::MatrixXd gaussian(int64_t n, int64_t d, uint64_t seed, double shift = 0.0, double scale = 1.0) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    return to_eigen(torch::randn({n, d}, gen, torch::kFloat64) * scale + shift);
}

/// Direct SSIM over every 11x11 window of a single-channel image.
double naive_ssim(const torch::Tensor& x, const torch::Tensor& y, double range) {
    const int64_t h = x.size(0), w = x.size(1);
    std::vector<double> g(11);
    double gs = 0.0;
    for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
    const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
    auto ax = x.accessor<double, 2>(), ay = y.accessor<double, 2>();
    double total = 0.0;
    int64_t count = 0;
    for (int64_t r = 0; r + 11 <= h; ++r)
        for (int64_t c = 0; c + 11 <= w; ++c) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double k = g[i] * g[j] / (gs * gs);
                    const double a = ax[r + i][c + j], b = ay[r + i][c + j];
                    mx += k * a;
                    my += k * b;
                    sxx += k * a * a;
                    syy += k * b * b;
                    sxy += k * a * b;
                }
            sxx -= mx * mx;
            syy -= my * my;
            sxy -= mx * my;
            total += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

} // namespace

TEST_CASE("Frechet distance of a set with itself is zero") {
    auto a = gaussian(500, 16, 1);
    CHECK(frechet_distance(a, a) < 1e-6);
}

TEST_CASE("Frechet distance between shifted Gaussians") {
    // N(0, I) vs N(mu, I) with ||mu||^2 = 1 in 4 dimensions
    auto a = gaussian(100000, 4, 2), b = gaussian(100000, 4, 3, 0.5);
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(0.05));
    // N(0, I) vs N(0, 4 I): d (2 - 1)^2 = d
    auto c = gaussian(100000, 3, 4, 0.0, 2.0);
    CHECK(frechet_distance(gaussian(100000, 3, 5), c) == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("Frechet distance is symmetric and invariant to rotations") {
    auto a = gaussian(400, 6, 6), b = gaussian(400, 6, 7, 0.3, 1.5);
    CHECK(std::abs(frechet_distance(a, b) - frechet_distance(b, a)) < 1e-8);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(6, 6, 8));
    Eigen::MatrixXd q = qr.householderQ();
    CHECK(std::abs(frechet_distance(a * q, b * q) - frechet_distance(a, b)) < 1e-8);
}

TEST_CASE("Frechet distance accepts rank-deficient covariances") {
    auto a = gaussian(10, 32, 9), b = gaussian(10, 32, 10);
    const double fd = frechet_distance(a, b);
    CHECK(std::isfinite(fd));
    CHECK(fd > 0.0);
    CHECK(frechet_distance(torch::ones({8, 4}), torch::ones({8, 4})) == 0.0);
}

TEST_CASE("SSIM matches a direct window computation") {
    torch::manual_seed(11);
    auto x = torch::rand({20, 23}, torch::kFloat64) * 2 - 1;
    auto y = (x + 0.3 * torch::randn({20, 23}, torch::kFloat64)).clamp(-1, 1);
    const double expected = naive_ssim(x, y, 2.0);
    CHECK(std::abs(ssim(x.view({1, 1, 20, 23}), y.view({1, 1, 20, 23})) - expected) < 1e-6);
    CHECK(ssim(x.view({1, 1, 20, 23}), x.view({1, 1, 20, 23})) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("SSIM averages over channels and batch") {
    torch::manual_seed(12);
    auto x = torch::rand({2, 3, 16, 16}) * 2 - 1, y = torch::rand({2, 3, 16, 16}) * 2 - 1;
    double sum = 0.0;
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c) sum += naive_ssim(x[n][c].to(torch::kFloat64), y[n][c].to(torch::kFloat64), 2.0);
    CHECK(std::abs(ssim(x, y) - sum / 6) < 1e-5);
}

TEST_CASE("perceptual distance with the identity extractor is the MSE") {
    IdentityExtractor phi;
    torch::manual_seed(13);
    auto x = torch::randn({2, 3, 8, 8}), y = torch::randn({2, 3, 8, 8});
    CHECK(perceptual_distance(x, y, phi) == doctest::Approx((x - y).pow(2).mean().item<double>()).epsilon(1e-6));
    CHECK(perceptual_distance(x, x, phi) == 0.0);
}

TEST_CASE("id score is the mean cosine similarity") {
    test::FlattenEmbedder emb;
    auto x = torch::zeros({2, 1, 1, 2}), y = torch::zeros({2, 1, 1, 2});
    x[0][0][0][0] = 1;
    y[0][0][0][0] = 3;
    x[1][0][0][0] = 1;
    y[1][0][0][1] = 1;
    CHECK(id_score(x, y, emb) == doctest::Approx(0.5));
    CHECK(id_score(x, x, emb) == doctest::Approx(1.0));
}
