#include "art/layout.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "art/errors.hpp"

namespace art {

namespace {

int require_int(const nlohmann::json& obj, const char* key, std::size_t index) {
    if (!obj.contains(key)) {
        throw ValidationError("region " + std::to_string(index) +
                              ": missing key \"" + key + "\"");
    }
    const auto& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ValidationError("region " + std::to_string(index) + ": key \"" +
                              key + "\" is not an integer");
    }
    return v.get<int>();
}

}  // namespace

AnonymousRegionLayout parse_layout(const std::string& text,
                                   int canvas_width, int canvas_height) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed layout JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw ValidationError("layout JSON must be an array of region objects");
    }

    AnonymousRegionLayout layout;
    layout.canvas_width = canvas_width;
    layout.canvas_height = canvas_height;

    std::set<int> seen;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& obj = doc[i];
        if (!obj.is_object()) {
            throw ValidationError("region " + std::to_string(i) + ": not an object");
        }
        Region r;
        r.layer_index = require_int(obj, "layer", i);
        r.cx = require_int(obj, "x", i);
        r.cy = require_int(obj, "y", i);
        r.width = require_int(obj, "width", i);
        r.height = require_int(obj, "height", i);
        if (r.layer_index < 0) {
            throw ValidationError("region " + std::to_string(i) +
                                  ": negative layer index");
        }
        if (r.width <= 0 || r.height <= 0) {
            throw ValidationError("region " + std::to_string(i) +
                                  ": non-positive size");
        }
        if (!seen.insert(r.layer_index).second) {
            throw ValidationError("duplicate layer index " +
                                  std::to_string(r.layer_index));
        }
        layout.regions.push_back(r);
    }
    std::sort(layout.regions.begin(), layout.regions.end(),
              [](const Region& a, const Region& b) {
                  return a.layer_index < b.layer_index;
              });
    return layout;
}

std::string serialize_layout(const AnonymousRegionLayout& layout) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const Region& r : layout.regions) {
        // ordered_json keeps the wire key order of the format.
        nlohmann::ordered_json obj;
        obj["layer"] = r.layer_index;
        obj["x"] = r.cx;
        obj["y"] = r.cy;
        obj["width"] = r.width;
        obj["height"] = r.height;
        doc.push_back(std::move(obj));
    }
    return doc.dump();
}

std::optional<PixelBox> bbox_from_alpha(const Raster& alpha, double threshold) {
    if (alpha.height() == 0 || alpha.width() == 0) {
        throw ValidationError("bbox_from_alpha: empty raster");
    }
    int min_x = alpha.width(), min_y = alpha.height();
    int max_x = -1, max_y = -1;
    for (int y = 0; y < alpha.height(); ++y) {
        for (int x = 0; x < alpha.width(); ++x) {
            if (alpha.at(y, x, 0) > threshold) {
                min_x = std::min(min_x, x);
                min_y = std::min(min_y, y);
                max_x = std::max(max_x, x);
                max_y = std::max(max_y, y);
            }
        }
    }
    if (max_x < 0) return std::nullopt;
    return PixelBox{min_x, min_y, max_x + 1, max_y + 1};
}

PixelBox ceiling_aligned_crop(const PixelBox& box, int canvas_width,
                              int canvas_height, int alignment) {
    if (alignment <= 0 || canvas_width < alignment || canvas_height < alignment) {
        throw ValidationError("ceiling_aligned_crop: canvas smaller than alignment");
    }
    if (canvas_width % alignment != 0 || canvas_height % alignment != 0) {
        throw ValidationError("ceiling_aligned_crop: alignment must divide canvas");
    }
    if (box.x1 < 0 || box.y1 < 0 || box.x2 > canvas_width || box.y2 > canvas_height ||
        box.width() <= 0 || box.height() <= 0) {
        throw ValidationError("ceiling_aligned_crop: box outside canvas");
    }
    // Snap outward to the alignment grid: the union of grid cells the box
    // touches. This is the unique minimal enclosing box whose corners and
    // dimensions all sit on the grid, so downstream token crops stay on the
    // canvas-wide token lattice.
    const int x1 = (box.x1 / alignment) * alignment;
    const int y1 = (box.y1 / alignment) * alignment;
    const int x2 = ((box.x2 + alignment - 1) / alignment) * alignment;
    const int y2 = ((box.y2 + alignment - 1) / alignment) * alignment;
    return PixelBox{x1, y1, x2, y2};
}

std::vector<std::string> validate_layout(const AnonymousRegionLayout& layout) {
    std::vector<std::string> violations;
    if (layout.canvas_width <= 0 || layout.canvas_height <= 0) {
        violations.push_back("canvas dimensions must be positive");
        return violations;
    }
    int prev_index = -1;
    for (std::size_t i = 0; i < layout.regions.size(); ++i) {
        const Region& r = layout.regions[i];
        const std::string tag = "region " + std::to_string(i) + " (layer " +
                                std::to_string(r.layer_index) + ")";
        if (r.layer_index <= prev_index) {
            violations.push_back(tag + ": layer indices must be strictly increasing");
        }
        prev_index = r.layer_index;
        if (r.width < 1 || r.height < 1) {
            violations.push_back(tag + ": width and height must be at least 1");
            continue;
        }
        const PixelBox b = r.box();
        if (b.x1 < 0 || b.y1 < 0 || b.x2 > layout.canvas_width ||
            b.y2 > layout.canvas_height) {
            violations.push_back(tag + ": rectangle out of canvas bounds");
        }
    }
    return violations;
}

}  // namespace art
