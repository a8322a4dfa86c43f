#pragma once

#include <optional>
#include <string>
#include <vector>

#include "art/raster.hpp"

namespace art {

/// Half-open pixel rectangle [x1, x2) x [y1, y2).
struct PixelBox {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    long long area() const { return static_cast<long long>(width()) * height(); }

    bool contains(const PixelBox& inner) const {
        return x1 <= inner.x1 && y1 <= inner.y1 && x2 >= inner.x2 && y2 >= inner.y2;
    }

    bool operator==(const PixelBox&) const = default;
};

/// One anonymous rectangular region: a layer slot with position and size but
/// no content label. Coordinates are the region center in pixels.
struct Region {
    int layer_index = 0;
    int cx = 0;
    int cy = 0;
    int width = 0;
    int height = 0;

    /// Corner form. Odd width/height round the left/top corner down.
    PixelBox box() const {
        const int x1 = cx - (width + 1) / 2;
        const int y1 = cy - (height + 1) / 2;
        return {x1, y1, x1 + width, y1 + height};
    }

    static Region from_box(int layer_index, const PixelBox& b) {
        Region r;
        r.layer_index = layer_index;
        r.width = b.width();
        r.height = b.height();
        r.cx = b.x1 + (r.width + 1) / 2;
        r.cy = b.y1 + (r.height + 1) / 2;
        return r;
    }

    bool operator==(const Region&) const = default;
};

/// Ordered list of anonymous regions on a canvas. Layer indices are strictly
/// increasing in list order; index 0 is the background/full-canvas entry when
/// the layout comes from the planner.
struct AnonymousRegionLayout {
    int canvas_width = 0;
    int canvas_height = 0;
    std::vector<Region> regions;

    bool operator==(const AnonymousRegionLayout&) const = default;
};

/// Parses the wire format: a JSON array of
/// {"layer": int, "x": int, "y": int, "width": int, "height": int}
/// with x/y as region centers. Canvas dimensions travel out-of-band.
/// Throws ValidationError on malformed JSON, missing keys, non-positive
/// sizes, or duplicate layer indices.
AnonymousRegionLayout parse_layout(const std::string& text,
                                   int canvas_width, int canvas_height);

/// Emits exactly the five wire keys per region, in layer order.
std::string serialize_layout(const AnonymousRegionLayout& layout);

/// Smallest box covering all pixels with alpha strictly greater than
/// `threshold`; nullopt when the raster is fully transparent.
/// `alpha` is H x W x 1 on the [0, 1] scale.
std::optional<PixelBox> bbox_from_alpha(const Raster& alpha, double threshold = 0.0);

/// Minimal enclosing box on the `alignment` grid: corners snap outward to
/// grid lines, so width and height are divisible by `alignment` and the box
/// stays inside the canvas. Requires `alignment` to divide both canvas
/// dimensions.
PixelBox ceiling_aligned_crop(const PixelBox& box, int canvas_width,
                              int canvas_height, int alignment = 16);

/// Empty list iff all Region/Layout invariants hold. Each violation is a
/// human-readable message naming the offending region.
std::vector<std::string> validate_layout(const AnonymousRegionLayout& layout);

}  // namespace art
