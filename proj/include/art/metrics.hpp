#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "art/raster.hpp"

namespace art {

/// PSNR in dB: 10*log10(peak^2 / MSE). Identical inputs return +infinity
/// (serialized as the string "inf" in reports).
double psnr(const Raster& a, const Raster& b, double peak);

/// Per-layer PSNR with RGB channels and the alpha channel scored separately
/// on the [-1, 1] scale (peak = 2). Layers are H x W x 4.
std::pair<std::vector<double>, std::vector<double>> layer_psnr(
    const std::vector<Raster>& pred_layers, const std::vector<Raster>& gt_layers);

/// Mean SSIM over valid 11 x 11 Gaussian windows (sigma 1.5, k1 0.01,
/// k2 0.03), averaged across channels. dynamic_range defaults to 2 for the
/// [-1, 1] scale. Images must be at least 11 x 11.
double ssim(const Raster& a, const Raster& b, double dynamic_range = 2.0);

/// PSNR and SSIM between the reference-stream output and the recomposited
/// layer outputs.
std::pair<double, double> merged_consistency(const Raster& reference,
                                             const Raster& composed);

struct MetricReport {
    double psnr_merged = std::numeric_limits<double>::infinity();
    std::vector<double> psnr_layer_rgb;
    std::vector<double> psnr_layer_alpha;
    double ssim = 1.0;
};

/// JSON serialization; infinities become the token "inf".
std::string report_to_json(const MetricReport& report);

}  // namespace art
