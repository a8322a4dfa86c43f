#include "art/planner.hpp"

#include <algorithm>
#include <cmath>

#include "art/errors.hpp"
#include "art/rng.hpp"

namespace art {

PlannerTemplate planner_template_from_name(const std::string& name) {
    if (name == "poster") return PlannerTemplate::Poster;
    if (name == "banner") return PlannerTemplate::Banner;
    if (name == "scatter") return PlannerTemplate::Scatter;
    if (name == "grid") return PlannerTemplate::Grid;
    throw ValidationError("unknown planner template: " + name);
}

std::string planner_template_name(PlannerTemplate t) {
    switch (t) {
        case PlannerTemplate::Poster: return "poster";
        case PlannerTemplate::Banner: return "banner";
        case PlannerTemplate::Scatter: return "scatter";
        case PlannerTemplate::Grid: return "grid";
    }
    return "unknown";
}

namespace {

constexpr int kMaxElements = 50;
constexpr int kMinCanvas = 128;
constexpr int kMinSize = 32;

int snap16_up(int v) { return ((v + 15) / 16) * 16; }

// Size snapped to 16 and corners snapped to the 16-px grid, clamped inside
// the canvas: every emitted region is its own aligned crop, and centers land
// on multiples of 8.
Region make_region(int layer, double cx, double cy, double w, double h,
                   int cw, int ch) {
    const int width = std::clamp(snap16_up(static_cast<int>(std::lround(w))), kMinSize, cw);
    const int height = std::clamp(snap16_up(static_cast<int>(std::lround(h))), kMinSize, ch);
    const int x1 = std::clamp(
        (static_cast<int>(std::lround(cx)) - width / 2) / 16 * 16, 0, cw - width);
    const int y1 = std::clamp(
        (static_cast<int>(std::lround(cy)) - height / 2) / 16 * 16, 0, ch - height);
    return Region::from_box(layer, PixelBox{x1, y1, x1 + width, y1 + height});
}

}  // namespace

PlannerResponse plan(const PlannerRequest& req) {
    if (req.canvas_width < kMinCanvas || req.canvas_height < kMinCanvas) {
        throw ValidationError("plan: canvas below template minimum (128 x 128)");
    }
    if (req.canvas_width % 16 != 0 || req.canvas_height % 16 != 0) {
        throw ValidationError("plan: canvas dimensions must be multiples of 16");
    }
    Rng rng(req.seed);
    int count = req.element_count.value_or(
        static_cast<int>(rng.uniform_int(7, 15)));
    if (count < 0 || count > kMaxElements) {
        throw ValidationError("plan: element count must be in [0, 50]");
    }

    const int cw = req.canvas_width;
    const int ch = req.canvas_height;
    AnonymousRegionLayout layout;
    layout.canvas_width = cw;
    layout.canvas_height = ch;
    layout.regions.push_back(make_region(0, cw / 2.0, ch / 2.0, cw, ch, cw, ch));

    const auto accent = [&](int layer) {
        const double w = rng.uniform(0.06, 0.25) * cw;
        const double h = rng.uniform(0.06, 0.25) * ch;
        return make_region(layer, rng.uniform(w / 2, cw - w / 2),
                           rng.uniform(h / 2, ch - h / 2), w, h, cw, ch);
    };

    for (int i = 1; i <= count; ++i) {
        Region r;
        switch (req.tmpl) {
            case PlannerTemplate::Poster:
                if (i == 1) {  // title band near the top
                    r = make_region(i, cw / 2.0, ch * 0.12, cw * 0.8, ch * 0.12, cw, ch);
                } else if (i == 2) {  // centered hero box
                    r = make_region(i, cw / 2.0, ch * 0.5, cw * 0.55, ch * 0.4, cw, ch);
                } else if (i == 3) {  // caption band near the bottom
                    r = make_region(i, cw / 2.0, ch * 0.88, cw * 0.6, ch * 0.08, cw, ch);
                } else {
                    r = accent(i);
                }
                break;
            case PlannerTemplate::Banner: {
                // Horizontal strips stacked top to bottom.
                const double band_h = ch / double(count + 1);
                r = make_region(i, cw / 2.0, band_h * (i - 0.5) + band_h / 2.0,
                                cw * rng.uniform(0.5, 0.9), band_h * 0.8, cw, ch);
                break;
            }
            case PlannerTemplate::Scatter:
                r = accent(i);
                break;
            case PlannerTemplate::Grid: {
                const int cells = static_cast<int>(std::ceil(std::sqrt(double(count))));
                const double cell_w = cw / double(cells);
                const double cell_h = ch / double(cells);
                const int gx = (i - 1) % cells;
                const int gy = (i - 1) / cells;
                r = make_region(i, cell_w * (gx + 0.5), cell_h * (gy + 0.5),
                                cell_w * 0.8, cell_h * 0.8, cw, ch);
                break;
            }
        }
        layout.regions.push_back(r);
    }

    PlannerResponse resp;
    resp.layout = std::move(layout);
    return resp;
}

LayoutStats layout_stats(std::span<const AnonymousRegionLayout> layouts,
                         const PipelineConfig& cfg) {
    if (layouts.empty()) throw ValidationError("layout_stats: empty list");
    LayoutStats stats;
    double area_sum = 0.0;
    double token_sum = 0.0;
    std::size_t region_count = 0;
    for (const AnonymousRegionLayout& layout : layouts) {
        stats.layer_count_hist[static_cast<int>(layout.regions.size())] += 1;
        const double canvas_area =
            static_cast<double>(layout.canvas_width) * layout.canvas_height;
        const int tpx = cfg.token_px();
        long long tokens = 0;
        for (const Region& r : layout.regions) {
            area_sum += r.box().area() / canvas_area;
            ++region_count;
            const PixelBox aligned = ceiling_aligned_crop(
                r.box(), layout.canvas_width, layout.canvas_height, tpx);
            tokens += static_cast<long long>(aligned.width() / tpx) *
                      (aligned.height() / tpx);
        }
        token_sum += static_cast<double>(tokens);
    }
    stats.mean_region_area_fraction = area_sum / static_cast<double>(region_count);
    stats.mean_token_count = token_sum / static_cast<double>(layouts.size());
    return stats;
}

}  // namespace art
