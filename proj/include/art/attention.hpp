#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "art/latent.hpp"
#include "art/rope.hpp"

namespace art {

/// Shape and position-embedding parameters for the toy attention forward
/// passes. context_tokens models text tokens as a prefix with all-zero ids.
struct AttentionConfig {
    int heads = 4;
    int head_dim = 16;
    AxesDim axes{4, 6, 6};
    double theta = 10000.0;
    int context_tokens = 0;

    int model_dim() const { return heads * head_dim; }
};

enum class SchemeKind { RegionalFull, Full, SpatialTemporal };

std::string scheme_name(SchemeKind scheme);
SchemeKind scheme_from_name(const std::string& name);

/// Joint softmax(QK^T/sqrt(Dh))V over one sequence with rotary applied to Q
/// and K. Q/K/V are N x (heads * head_dim); the caller supplies projections.
/// When the sequence was built from cropped regions this is the Regional
/// Full scheme.
std::vector<double> attend(const std::vector<double>& q, const std::vector<double>& k,
                           const std::vector<double>& v,
                           const std::vector<TokenId>& ids,
                           const AttentionConfig& cfg);

/// One uncropped full-canvas token grid per layer.
struct LayerGrid {
    int rows = 0;
    int cols = 0;
    std::vector<double> q, k, v;  // (rows*cols) x model_dim
};

/// Baseline from video architectures: spatial attention within each layer's
/// grid, then temporal attention across layers at each spatial index.
/// All grids must share the same shape.
std::vector<std::vector<double>> attend_spatial_temporal(
    const std::vector<LayerGrid>& layers, const AttentionConfig& cfg);

/// Analytical cost of one attention pass over a layout under a scheme.
struct CostReport {
    SchemeKind scheme = SchemeKind::RegionalFull;
    long long total_tokens = 0;
    long long attention_pairs = 0;  // sum over attention calls of q_len * k_len
    long long est_activation_memory = 0;  // bytes, 4 per pair per head
    std::vector<std::pair<std::string, long long>> per_layer_breakdown;
};

/// Token/pair counts for the three schemes. Regions with layer_index 0 are
/// the planner's background entry and are not counted as foregrounds.
///   RegionalFull: tokens = ctx + n_mg + n_bg + sum_i a_i, pairs = tokens^2
///   Full:         tokens = ctx + n_mg + n_bg + K * n_canvas, pairs = tokens^2
///   SpatialTemporal: (K+2) spatial passes over (ctx + n_canvas) tokens plus
///                    n_canvas temporal passes over (ctx + K + 2) tokens
CostReport cost_report(const AnonymousRegionLayout& layout, SchemeKind scheme,
                       const PipelineConfig& pipe, const AttentionConfig& cfg);

struct SweepRow {
    int k = 0;
    long long tokens = 0;
    long long pairs = 0;
    long long est_memory_bytes = 0;
};

/// Deterministic cost table over a K range for one region size; all regions
/// are region_w x region_h px packed anywhere (cost depends only on sizes).
std::vector<SweepRow> scaling_sweep(int canvas_width, int canvas_height,
                                    int region_width, int region_height,
                                    int k_min, int k_max, SchemeKind scheme,
                                    const PipelineConfig& pipe,
                                    const AttentionConfig& cfg);

/// CSV with header `k,tokens,pairs,est_memory_bytes`.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace art
