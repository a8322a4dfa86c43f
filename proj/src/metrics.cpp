#include "art/metrics.hpp"

#include <cmath>

#include <json.hpp>

#include "art/errors.hpp"

namespace art {

double psnr(const Raster& a, const Raster& b, double peak) {
    if (!a.same_shape(b)) throw ValidationError("psnr: shape mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

Raster channel_slice(const Raster& src, int c_begin, int c_end) {
    Raster out(src.height(), src.width(), c_end - c_begin);
    for (int y = 0; y < src.height(); ++y)
        for (int x = 0; x < src.width(); ++x)
            for (int c = c_begin; c < c_end; ++c)
                out.at(y, x, c - c_begin) = src.at(y, x, c);
    return out;
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> layer_psnr(
    const std::vector<Raster>& pred_layers, const std::vector<Raster>& gt_layers) {
    if (pred_layers.size() != gt_layers.size()) {
        throw ValidationError("layer_psnr: layer count mismatch");
    }
    std::vector<double> rgb, alpha;
    for (std::size_t i = 0; i < pred_layers.size(); ++i) {
        if (pred_layers[i].channels() != 4 || gt_layers[i].channels() != 4) {
            throw ValidationError("layer_psnr: layers must be RGBA");
        }
        rgb.push_back(psnr(channel_slice(pred_layers[i], 0, 3),
                           channel_slice(gt_layers[i], 0, 3), 2.0));
        alpha.push_back(psnr(channel_slice(pred_layers[i], 3, 4),
                             channel_slice(gt_layers[i], 3, 4), 2.0));
    }
    return {rgb, alpha};
}

double ssim(const Raster& a, const Raster& b, double dynamic_range) {
    if (!a.same_shape(b)) throw ValidationError("ssim: shape mismatch");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    if (a.height() < kWin || a.width() < kWin) {
        throw ValidationError("ssim: images smaller than the 11x11 window");
    }
    double w[kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        wsum += w[i];
    }
    for (double& x : w) x /= wsum;

    const double c1 = std::pow(0.01 * dynamic_range, 2);
    const double c2 = std::pow(0.03 * dynamic_range, 2);

    const int oh = a.height() - kWin + 1;
    const int ow = a.width() - kWin + 1;
    double total = 0.0;
    std::size_t count = 0;

    // Separable Gaussian over the five window statistics, per channel.
    const int H = a.height(), W = a.width();
    std::vector<double> row_mu_a(static_cast<std::size_t>(H) * ow);
    std::vector<double> row_mu_b(row_mu_a.size()), row_aa(row_mu_a.size()),
        row_bb(row_mu_a.size()), row_ab(row_mu_a.size());
    for (int ch = 0; ch < a.channels(); ++ch) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < ow; ++x) {
                double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < kWin; ++i) {
                    const double va = a.at(y, x + i, ch);
                    const double vb = b.at(y, x + i, ch);
                    ma += w[i] * va;
                    mb += w[i] * vb;
                    aa += w[i] * va * va;
                    bb += w[i] * vb * vb;
                    ab += w[i] * va * vb;
                }
                const std::size_t idx = static_cast<std::size_t>(y) * ow + x;
                row_mu_a[idx] = ma;
                row_mu_b[idx] = mb;
                row_aa[idx] = aa;
                row_bb[idx] = bb;
                row_ab[idx] = ab;
            }
        }
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < kWin; ++i) {
                    const std::size_t idx = static_cast<std::size_t>(y + i) * ow + x;
                    ma += w[i] * row_mu_a[idx];
                    mb += w[i] * row_mu_b[idx];
                    aa += w[i] * row_aa[idx];
                    bb += w[i] * row_bb[idx];
                    ab += w[i] * row_ab[idx];
                }
                const double var_a = aa - ma * ma;
                const double var_b = bb - mb * mb;
                const double cov = ab - ma * mb;
                const double s = ((2 * ma * mb + c1) * (2 * cov + c2)) /
                                 ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                total += s;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

std::pair<double, double> merged_consistency(const Raster& reference,
                                             const Raster& composed) {
    return {psnr(reference, composed, 2.0), ssim(reference, composed, 2.0)};
}

std::string report_to_json(const MetricReport& report) {
    const auto encode = [](double v) -> nlohmann::ordered_json {
        if (std::isinf(v)) return "inf";
        return v;
    };
    nlohmann::ordered_json doc;
    doc["psnr_merged"] = encode(report.psnr_merged);
    doc["psnr_layer_rgb"] = nlohmann::json::array();
    for (double v : report.psnr_layer_rgb) doc["psnr_layer_rgb"].push_back(encode(v));
    doc["psnr_layer_alpha"] = nlohmann::json::array();
    for (double v : report.psnr_layer_alpha) doc["psnr_layer_alpha"].push_back(encode(v));
    doc["ssim"] = encode(report.ssim);
    return doc.dump(2);
}

}  // namespace art
