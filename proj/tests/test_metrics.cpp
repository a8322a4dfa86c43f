#include <doctest.h>

#include <cmath>
#include <limits>

#include "art/errors.hpp"
#include "art/metrics.hpp"
#include "art/rng.hpp"

using namespace art;

namespace {

Raster random_raster(Rng& rng, int h, int w, int c) {
    Raster out(h, w, c);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = rng.uniform(-1.0, 1.0);
    return out;
}

// Direct scalar PSNR: mean squared error over every sample.
double psnr_oracle(const Raster& a, const Raster& b, double peak) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(a.size());
    return 10.0 * std::log10(peak * peak / mse);
}

// Brute-force SSIM: an explicit 2D Gaussian window at every valid offset,
// no separability tricks.
double ssim_oracle(const Raster& a, const Raster& b, double range) {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    double w1[kWin];
    double s = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - 5.0;
        w1[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        s += w1[i];
    }
    for (double& x : w1) x /= s;
    double w2[kWin][kWin];
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) w2[i][j] = w1[i] * w1[j];

    const double c1 = std::pow(0.01 * range, 2);
    const double c2 = std::pow(0.03 * range, 2);
    double total = 0.0;
    std::size_t count = 0;
    for (int ch = 0; ch < a.channels(); ++ch) {
        for (int y = 0; y + kWin <= a.height(); ++y) {
            for (int x = 0; x + kWin <= a.width(); ++x) {
                double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        const double va = a.at(y + i, x + j, ch);
                        const double vb = b.at(y + i, x + j, ch);
                        ma += w2[i][j] * va;
                        mb += w2[i][j] * vb;
                        aa += w2[i][j] * va * va;
                        bb += w2[i][j] * vb * vb;
                        ab += w2[i][j] * va * vb;
                    }
                }
                const double va = aa - ma * ma;
                const double vb = bb - mb * mb;
                const double cov = ab - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace

TEST_CASE("psnr of identical rasters is +infinity") {
    Rng rng(201);
    const Raster a = random_raster(rng, 8, 8, 3);
    CHECK(std::isinf(psnr(a, a, 2.0)));
    CHECK(psnr(a, a, 2.0) > 0.0);
}

TEST_CASE("psnr closed-form fixture: constant offset of peak/10 gives 20 dB") {
    Raster a(8, 8, 3, 0.1);
    Raster b(8, 8, 3, 0.3);  // |d| = 0.2 = peak/10 for peak 2
    CHECK(psnr(a, b, 2.0) == doctest::Approx(20.0).epsilon(1e-12));
    // Halving the error adds ~6.02 dB.
    Raster c(8, 8, 3, 0.2);
    CHECK(psnr(a, c, 2.0) == doctest::Approx(20.0 + 20.0 * std::log10(2.0)));
}

TEST_CASE("psnr matches the scalar oracle and is symmetric") {
    Rng rng(203);
    for (int trial = 0; trial < 20; ++trial) {
        const Raster a = random_raster(rng, 12, 9, 3);
        const Raster b = random_raster(rng, 12, 9, 3);
        CHECK(std::abs(psnr(a, b, 2.0) - psnr_oracle(a, b, 2.0)) <= 1e-6);
        CHECK(psnr(a, b, 2.0) == psnr(b, a, 2.0));
    }
}

TEST_CASE("psnr rejects mismatched shapes") {
    CHECK_THROWS_AS(psnr(Raster(4, 4, 3), Raster(4, 5, 3), 2.0), ValidationError);
}

TEST_CASE("layer_psnr separates RGB from alpha") {
    Rng rng(207);
    const Raster gt = random_raster(rng, 8, 8, 4);
    Raster pred = gt;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) pred.at(y, x, 3) += 0.2;

    const auto [rgb, alpha] = layer_psnr({pred}, {gt});
    REQUIRE(rgb.size() == 1);
    REQUIRE(alpha.size() == 1);
    CHECK(std::isinf(rgb[0]));
    CHECK(alpha[0] == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("layer_psnr validates its inputs") {
    const Raster rgba(8, 8, 4);
    const Raster rgb(8, 8, 3);
    CHECK_THROWS_AS(layer_psnr({rgba}, {}), ValidationError);
    CHECK_THROWS_AS(layer_psnr({rgb}, {rgba}), ValidationError);
}

TEST_CASE("ssim of identical images is exactly 1") {
    Rng rng(211);
    const Raster a = random_raster(rng, 16, 16, 3);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim matches the brute-force 2D-window oracle") {
    Rng rng(213);
    for (int trial = 0; trial < 5; ++trial) {
        const Raster a = random_raster(rng, 20, 17, 3);
        Raster b = a;
        // Mix of correlated noise and a mean shift keeps all SSIM terms active.
        for (std::size_t i = 0; i < b.size(); ++i) {
            b.data()[i] = 0.8 * b.data()[i] + 0.1 + 0.05 * rng.uniform(-1.0, 1.0);
        }
        CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b, 2.0)) <= 1e-6);
        CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
    }
}

TEST_CASE("ssim decreases under heavy distortion") {
    Rng rng(217);
    const Raster a = random_raster(rng, 16, 16, 1);
    const Raster noise = random_raster(rng, 16, 16, 1);
    CHECK(ssim(a, noise) < ssim(a, a));
    CHECK(ssim(a, noise) < 0.9);
}

TEST_CASE("ssim rejects undersized or mismatched images") {
    CHECK_THROWS_AS(ssim(Raster(8, 8, 1), Raster(8, 8, 1)), ValidationError);
    CHECK_THROWS_AS(ssim(Raster(16, 16, 1), Raster(16, 16, 2)), ValidationError);
}

TEST_CASE("merged_consistency is perfect on identical inputs") {
    Rng rng(219);
    const Raster merged = random_raster(rng, 16, 16, 3);
    const auto [p, s] = merged_consistency(merged, merged);
    CHECK(std::isinf(p));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("report_to_json serializes infinities as the token inf") {
    MetricReport report;
    report.psnr_merged = std::numeric_limits<double>::infinity();
    report.psnr_layer_rgb = {20.0, std::numeric_limits<double>::infinity()};
    report.psnr_layer_alpha = {18.5};
    report.ssim = 0.75;
    const std::string json = report_to_json(report);
    CHECK(json.find("\"psnr_merged\": \"inf\"") != std::string::npos);
    CHECK(json.find("20.0") != std::string::npos);
    CHECK(json.find("\"ssim\": 0.75") != std::string::npos);
    CHECK(json.find("18.5") != std::string::npos);
}
