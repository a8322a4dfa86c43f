#include "art/transparency.hpp"

#include <algorithm>
#include <cmath>

#include "art/errors.hpp"
#include "art/rng.hpp"

namespace art {

Raster encode_transparency(const Raster& rgba) {
    if (rgba.channels() != 4) {
        throw ValidationError("encode_transparency: expected H x W x 4 input");
    }
    Raster out(rgba.height(), rgba.width(), 3);
    for (int y = 0; y < rgba.height(); ++y) {
        for (int x = 0; x < rgba.width(); ++x) {
            for (int c = 0; c < 4; ++c) {
                const double v = rgba.at(y, x, c);
                if (v < -1.0 || v > 1.0) {
                    throw ValidationError("encode_transparency: value outside [-1, 1]");
                }
            }
            const double coeff = 0.5 * rgba.at(y, x, 3) + 0.5;
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = coeff * rgba.at(y, x, c);
            }
        }
    }
    return out;
}

Raster decode_transparency(const Raster& gray, const Raster& alpha, double eps) {
    if (gray.channels() != 3 || alpha.channels() != 1 ||
        gray.height() != alpha.height() || gray.width() != alpha.width()) {
        throw ValidationError("decode_transparency: shape mismatch");
    }
    Raster out(gray.height(), gray.width(), 3);
    for (int y = 0; y < gray.height(); ++y) {
        for (int x = 0; x < gray.width(); ++x) {
            const double coeff = 0.5 * alpha.at(y, x, 0) + 0.5;
            // Recoverable iff alpha > -1 + eps, i.e. the coefficient clears
            // eps/2: keeps round trips exact for every alpha above -0.999.
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = 2.0 * coeff > eps ? gray.at(y, x, c) / coeff : 0.0;
            }
        }
    }
    return out;
}

Raster composite(const Raster& base, const std::vector<PlacedLayer>& foregrounds) {
    if (base.channels() != 3) {
        throw ValidationError("composite: base must be H x W x 3");
    }
    Raster out = base;
    for (const PlacedLayer& fg : foregrounds) {
        const PixelBox b = fg.region.box();
        if (fg.pixels.channels() != 4 || fg.pixels.height() != b.height() ||
            fg.pixels.width() != b.width()) {
            throw ValidationError("composite: layer raster does not match its region");
        }
        if (b.x1 < 0 || b.y1 < 0 || b.x2 > base.width() || b.y2 > base.height()) {
            throw ValidationError("composite: region outside canvas");
        }
        for (int y = 0; y < b.height(); ++y) {
            for (int x = 0; x < b.width(); ++x) {
                // Straight-alpha "over"; the blend is affine so [-1, 1]
                // values compose identically to the [0, 1] working scale.
                const double a = 0.5 * fg.pixels.at(y, x, 3) + 0.5;
                for (int c = 0; c < 3; ++c) {
                    double& under = out.at(b.y1 + y, b.x1 + x, c);
                    under = a * fg.pixels.at(y, x, c) + (1.0 - a) * under;
                }
            }
        }
    }
    return out;
}

namespace {

constexpr int kMinRegionSize = 32;

Raster gradient_background(Rng& rng, int h, int w) {
    Raster bg(h, w, 3);
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = rng.uniform(-0.8, 0.8);
        c1[c] = rng.uniform(-0.8, 0.8);
    }
    const bool vertical = rng.next_u64() % 2 == 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double t = vertical ? (h > 1 ? double(y) / (h - 1) : 0.0)
                                      : (w > 1 ? double(x) / (w - 1) : 0.0);
            for (int c = 0; c < 3; ++c) {
                bg.at(y, x, c) = (1.0 - t) * c0[c] + t * c1[c];
            }
        }
    }
    return bg;
}

PlacedLayer random_shape_layer(Rng& rng, int layer_index, int cw, int ch) {
    const int w = static_cast<int>(rng.uniform_int(kMinRegionSize,
                                                   std::max(kMinRegionSize, cw / 2)));
    const int h = static_cast<int>(rng.uniform_int(kMinRegionSize,
                                                   std::max(kMinRegionSize, ch / 2)));
    const int x1 = static_cast<int>(rng.uniform_int(0, cw - w));
    const int y1 = static_cast<int>(rng.uniform_int(0, ch - h));

    PlacedLayer layer;
    layer.region = Region::from_box(layer_index, PixelBox{x1, y1, x1 + w, y1 + h});
    layer.pixels = Raster(h, w, 4, 0.0);

    double color[3];
    for (int c = 0; c < 3; ++c) color[c] = rng.uniform(-0.9, 0.9);
    const int kind = static_cast<int>(rng.uniform_int(0, 2));
    // Keep a 2 px transparent margin so opaque pixels stay strictly inside
    // the region.
    const double margin = 2.0;
    const double rx = w / 2.0 - margin;
    const double ry = h / 2.0 - margin;
    const double cx = w / 2.0;
    const double cy = h / 2.0;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = (x + 0.5 - cx) / rx;
            const double dy = (y + 0.5 - cy) / ry;
            double alpha01 = 0.0;  // [0, 1]
            switch (kind) {
                case 0:  // rectangle
                    alpha01 = (std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0) ? 1.0 : 0.0;
                    break;
                case 1:  // ellipse
                    alpha01 = (dx * dx + dy * dy <= 1.0) ? 1.0 : 0.0;
                    break;
                default: {  // soft-edged blob
                    const double r = std::sqrt(dx * dx + dy * dy);
                    alpha01 = std::clamp((1.0 - r) * 4.0, 0.0, 1.0);
                    break;
                }
            }
            layer.pixels.at(y, x, 3) = 2.0 * alpha01 - 1.0;
            if (alpha01 > 0.0) {
                for (int c = 0; c < 3; ++c) layer.pixels.at(y, x, c) = color[c];
            }
        }
    }
    return layer;
}

}  // namespace

MultiLayerImage synth_multilayer(std::uint64_t seed, int k,
                                 int canvas_width, int canvas_height) {
    if (k < 0) throw ValidationError("synth_multilayer: k must be non-negative");
    if (k > 0 && (canvas_width < kMinRegionSize || canvas_height < kMinRegionSize)) {
        throw ValidationError("synth_multilayer: canvas too small for minimum region size");
    }
    Rng rng(seed);
    MultiLayerImage img;
    img.background = gradient_background(rng, canvas_height, canvas_width);
    for (int i = 1; i <= k; ++i) {
        img.foregrounds.push_back(
            random_shape_layer(rng, i, canvas_width, canvas_height));
    }
    img.merged = composite(img.background, img.foregrounds);
    return img;
}

}  // namespace art
