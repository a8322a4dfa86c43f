#include "art/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "art/errors.hpp"

namespace art {

std::string scheme_name(SchemeKind scheme) {
    switch (scheme) {
        case SchemeKind::RegionalFull: return "regional";
        case SchemeKind::Full: return "full";
        case SchemeKind::SpatialTemporal: return "spatial-temporal";
    }
    return "unknown";
}

SchemeKind scheme_from_name(const std::string& name) {
    if (name == "regional") return SchemeKind::RegionalFull;
    if (name == "full") return SchemeKind::Full;
    if (name == "spatial-temporal" || name == "st") return SchemeKind::SpatialTemporal;
    throw ValidationError("unknown attention scheme: " + name);
}

namespace {

// softmax(QK^T/sqrt(dh))V for one head over a flat token list, with
// precomputed rotary tables applied to q and k.
void attend_one_head(const double* q, const double* k, const double* v,
                     std::size_t n, int dh, int stride, const RopeTables& rope,
                     double* out) {
    std::vector<double> qr(n * dh), kr(n * dh);
    for (std::size_t i = 0; i < n; ++i) {
        const double* c = rope.cos_row(i);
        const double* s = rope.sin_row(i);
        for (int j = 0; j < dh; j += 2) {
            const double qa = q[i * stride + j], qb = q[i * stride + j + 1];
            const double ka = k[i * stride + j], kb = k[i * stride + j + 1];
            qr[i * dh + j] = qa * c[j] - qb * s[j];
            qr[i * dh + j + 1] = qb * c[j + 1] + qa * s[j + 1];
            kr[i * dh + j] = ka * c[j] - kb * s[j];
            kr[i * dh + j + 1] = kb * c[j + 1] + ka * s[j + 1];
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        double max_s = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < n; ++m) {
            double dot = 0.0;
            for (int j = 0; j < dh; ++j) dot += qr[i * dh + j] * kr[m * dh + j];
            scores[m] = dot * scale;
            max_s = std::max(max_s, scores[m]);
        }
        double denom = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            scores[m] = std::exp(scores[m] - max_s);
            denom += scores[m];
        }
        for (int j = 0; j < dh; ++j) out[i * stride + j] = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const double w = scores[m] / denom;
            for (int j = 0; j < dh; ++j) {
                out[i * stride + j] += w * v[m * stride + j];
            }
        }
    }
}

}  // namespace

std::vector<double> attend(const std::vector<double>& q, const std::vector<double>& k,
                           const std::vector<double>& v,
                           const std::vector<TokenId>& ids,
                           const AttentionConfig& cfg) {
    const std::size_t n = ids.size();
    const std::size_t model = static_cast<std::size_t>(cfg.model_dim());
    if (q.size() != n * model || k.size() != n * model || v.size() != n * model) {
        throw ValidationError("attend: id/token length mismatch");
    }
    if (cfg.axes.total() != cfg.head_dim) {
        throw ValidationError("attend: head_dim must equal sum of axes_dim");
    }
    const RopeTables rope = rope_3d(ids, cfg.axes, cfg.theta);
    std::vector<double> out(n * model, 0.0);
    for (int h = 0; h < cfg.heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * cfg.head_dim;
        attend_one_head(q.data() + off, k.data() + off, v.data() + off, n,
                        cfg.head_dim, static_cast<int>(model), rope,
                        out.data() + off);
    }
    return out;
}

std::vector<std::vector<double>> attend_spatial_temporal(
    const std::vector<LayerGrid>& layers, const AttentionConfig& cfg) {
    if (layers.empty()) return {};
    const int rows = layers[0].rows, cols = layers[0].cols;
    const std::size_t g = static_cast<std::size_t>(rows) * cols;
    const std::size_t model = static_cast<std::size_t>(cfg.model_dim());
    for (const LayerGrid& l : layers) {
        if (l.rows != rows || l.cols != cols || l.q.size() != g * model ||
            l.k.size() != g * model || l.v.size() != g * model) {
            throw ValidationError("attend_spatial_temporal: ragged grids");
        }
    }

    // Spatial pass: full attention within each layer's grid, layer axis id 0.
    std::vector<std::vector<double>> spatial;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        std::vector<TokenId> ids;
        ids.reserve(g);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) ids.push_back(TokenId{0, r, c});
        spatial.push_back(attend(layers[li].q, layers[li].k, layers[li].v, ids, cfg));
    }

    // Temporal pass: attention across layers at each spatial index, with the
    // layer axis as the only varying position. The spatial output serves as
    // q/k/v for the second pass.
    std::vector<std::vector<double>> out(layers.size(),
                                         std::vector<double>(g * model, 0.0));
    std::vector<TokenId> ids(layers.size());
    std::vector<double> col(layers.size() * model);
    for (std::size_t pos = 0; pos < g; ++pos) {
        const int r = static_cast<int>(pos) / cols;
        const int c = static_cast<int>(pos) % cols;
        for (std::size_t li = 0; li < layers.size(); ++li) {
            ids[li] = TokenId{static_cast<std::int64_t>(li), r, c};
            std::copy_n(spatial[li].data() + pos * model, model,
                        col.data() + li * model);
        }
        const std::vector<double> res = attend(col, col, col, ids, cfg);
        for (std::size_t li = 0; li < layers.size(); ++li) {
            std::copy_n(res.data() + li * model, model, out[li].data() + pos * model);
        }
    }
    return out;
}

CostReport cost_report(const AnonymousRegionLayout& layout, SchemeKind scheme,
                       const PipelineConfig& pipe, const AttentionConfig& cfg) {
    const int tpx = pipe.token_px();
    const long long n_canvas =
        (static_cast<long long>(layout.canvas_width) / tpx) *
        (layout.canvas_height / tpx);

    CostReport report;
    report.scheme = scheme;
    report.per_layer_breakdown.emplace_back("context", cfg.context_tokens);
    report.per_layer_breakdown.emplace_back("merged", n_canvas);
    report.per_layer_breakdown.emplace_back("background", n_canvas);

    long long k = 0;
    long long regional_fg = 0;
    for (const Region& r : layout.regions) {
        if (r.layer_index == 0) continue;  // planner's background entry
        const PixelBox aligned = ceiling_aligned_crop(
            r.box(), layout.canvas_width, layout.canvas_height, tpx);
        const long long tokens =
            (static_cast<long long>(aligned.width()) / tpx) * (aligned.height() / tpx);
        report.per_layer_breakdown.emplace_back(
            "fg" + std::to_string(r.layer_index),
            scheme == SchemeKind::RegionalFull ? tokens : n_canvas);
        regional_fg += tokens;
        ++k;
    }

    const long long ctx = cfg.context_tokens;
    switch (scheme) {
        case SchemeKind::RegionalFull: {
            report.total_tokens = ctx + 2 * n_canvas + regional_fg;
            report.attention_pairs = report.total_tokens * report.total_tokens;
            break;
        }
        case SchemeKind::Full: {
            report.total_tokens = ctx + 2 * n_canvas + k * n_canvas;
            report.attention_pairs = report.total_tokens * report.total_tokens;
            break;
        }
        case SchemeKind::SpatialTemporal: {
            // k+2 uncropped streams: one spatial pass per stream plus one
            // temporal pass per spatial position.
            const long long streams = k + 2;
            report.total_tokens = ctx + streams * n_canvas;
            report.attention_pairs =
                streams * (ctx + n_canvas) * (ctx + n_canvas) +
                n_canvas * (ctx + streams) * (ctx + streams);
            break;
        }
    }
    report.est_activation_memory = report.attention_pairs * 4LL * cfg.heads;
    return report;
}

std::vector<SweepRow> scaling_sweep(int canvas_width, int canvas_height,
                                    int region_width, int region_height,
                                    int k_min, int k_max, SchemeKind scheme,
                                    const PipelineConfig& pipe,
                                    const AttentionConfig& cfg) {
    if (k_max < k_min) throw ValidationError("scaling_sweep: empty k range");
    std::vector<SweepRow> rows;
    for (int k = k_min; k <= k_max; ++k) {
        // Cost depends only on region sizes; stack all regions at the origin.
        AnonymousRegionLayout layout;
        layout.canvas_width = canvas_width;
        layout.canvas_height = canvas_height;
        for (int i = 1; i <= k; ++i) {
            layout.regions.push_back(Region::from_box(
                i, PixelBox{0, 0, region_width, region_height}));
        }
        const CostReport r = cost_report(layout, scheme, pipe, cfg);
        rows.push_back(SweepRow{k, r.total_tokens, r.attention_pairs,
                                r.est_activation_memory});
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "k,tokens,pairs,est_memory_bytes\n";
    for (const SweepRow& r : rows) {
        out << r.k << ',' << r.tokens << ',' << r.pairs << ','
            << r.est_memory_bytes << '\n';
    }
    return out.str();
}

}  // namespace art
