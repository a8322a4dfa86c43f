#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "art/latent.hpp"
#include "art/layout.hpp"

namespace art {

enum class PlannerTemplate { Poster, Banner, Scatter, Grid };

PlannerTemplate planner_template_from_name(const std::string& name);
std::string planner_template_name(PlannerTemplate t);

/// Request for a rule-based layout. element_count nullopt means "sample a
/// typical design size" (uniform 7..15, centered on real-world averages).
struct PlannerRequest {
    int canvas_width = 1024;
    int canvas_height = 1024;
    std::optional<int> element_count;  // <= 50
    std::uint64_t seed = 0;
    PlannerTemplate tmpl = PlannerTemplate::Poster;
};

struct PlannerResponse {
    AnonymousRegionLayout layout;  // region 0 full-canvas, then elements
};

/// Deterministic heuristic planner: emits element_count + 1 regions (layer 0
/// spans the canvas; the rest follow the template: title band, hero box,
/// caption bands, scattered accents). Centers snap to multiples of 8 and
/// sizes to multiples of 16, so every region is crop-aligned.
/// Throws ValidationError when the canvas is below template minimums
/// (128 x 128) or element_count exceeds 50.
PlannerResponse plan(const PlannerRequest& req);

struct LayoutStats {
    std::map<int, int> layer_count_hist;  // regions-per-layout -> #layouts
    double mean_region_area_fraction = 0.0;
    double mean_token_count = 0.0;  // per layout: aligned-crop token sum over regions
};

LayoutStats layout_stats(std::span<const AnonymousRegionLayout> layouts,
                         const PipelineConfig& cfg);

}  // namespace art
