#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "art/layout.hpp"
#include "art/raster.hpp"

namespace art {

/// RGBA layer plus the region it occupies on the canvas. The raster is
/// region-sized (region.height x region.width x 4), all channels in [-1, 1];
/// alpha -1 is fully transparent, +1 fully opaque.
struct PlacedLayer {
    Raster pixels;
    Region region;
};

/// RGB background, K placed RGBA foregrounds, and the composited merged
/// reference.
struct MultiLayerImage {
    Raster background;                    // H x W x 3
    std::vector<PlacedLayer> foregrounds; // ascending layer_index
    std::optional<Raster> merged;         // H x W x 3, equals composite()
};

/// Folds alpha into RGB: out = (0.5 * A + 0.5) * RGB per pixel, mapping fully
/// transparent pixels to mid-gray (0 on the [-1, 1] scale).
/// Input is H x W x 4 in [-1, 1]; throws ValidationError on out-of-range values.
Raster encode_transparency(const Raster& rgba);

/// Inverse of encode_transparency given the alpha plane (H x W x 1 in [-1, 1]).
/// Where alpha <= -1 + eps (coefficient 0.5 * A + 0.5 at or below eps / 2,
/// an alpha-scale cutoff) the RGB is unrecoverable and
/// defined as 0.
Raster decode_transparency(const Raster& gray, const Raster& alpha, double eps = 1e-3);

/// Straight-alpha "over" in double precision, layers applied in list order
/// (ascending layer_index). Pixels outside every region equal the base.
Raster composite(const Raster& base, const std::vector<PlacedLayer>& foregrounds);

/// Deterministic synthetic multi-layer sample: a smooth gradient background
/// and k colored shapes (rectangle / ellipse / soft blob), each inside its
/// own random region of at least 32 x 32 px. The merged field is populated
/// via composite(). Stand-in data source for desk-scale experiments.
/// Throws ValidationError when the canvas cannot fit k minimum-size regions.
MultiLayerImage synth_multilayer(std::uint64_t seed, int k,
                                 int canvas_width, int canvas_height);

}  // namespace art
