#include "art/decoder.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "art/errors.hpp"
#include "art/rng.hpp"

namespace art {

namespace {

constexpr double kLnEps = 1e-6;

struct SliceMap {
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> slices;
    std::size_t total = 0;

    void add(const std::string& name, std::size_t count) {
        slices.emplace_back(name, std::make_pair(total, count));
        total += count;
    }
    std::size_t offset(const std::string& name) const {
        for (const auto& [n, span] : slices) {
            if (n == name) return span.first;
        }
        throw ValidationError("unknown parameter slice: " + name);
    }
};

SliceMap build_slice_map(const DecoderConfig& cfg) {
    const std::size_t h = cfg.hidden, in = cfg.in_channels, m = cfg.mlp_dim,
                      out = cfg.out_dim();
    SliceMap map;
    map.add("lin_in.w", h * in);
    map.add("lin_in.b", h);
    for (int b = 0; b < cfg.depth; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        map.add(p + "ln1.g", h);
        map.add(p + "ln1.b", h);
        map.add(p + "attn.wq", h * h);
        map.add(p + "attn.bq", h);
        map.add(p + "attn.wk", h * h);
        map.add(p + "attn.bk", h);
        map.add(p + "attn.wv", h * h);
        map.add(p + "attn.bv", h);
        map.add(p + "attn.wo", h * h);
        map.add(p + "attn.bo", h);
        map.add(p + "ln2.g", h);
        map.add(p + "ln2.b", h);
        map.add(p + "mlp.w1", m * h);
        map.add(p + "mlp.b1", m);
        map.add(p + "mlp.w2", h * m);
        map.add(p + "mlp.b2", h);
    }
    map.add("ln_f.g", h);
    map.add("ln_f.b", h);
    map.add("lin_out.w", out * h);
    map.add("lin_out.b", out);
    return map;
}

void check_config(const DecoderConfig& cfg) {
    if (cfg.hidden % cfg.heads != 0) {
        throw ValidationError("decoder: hidden must be divisible by heads");
    }
    if (cfg.axes.total() != cfg.head_dim()) {
        throw ValidationError("decoder: axes_dim must sum to hidden / heads");
    }
    if (cfg.head_dim() % 2 != 0) {
        throw ValidationError("decoder: per-head dim must be even");
    }
}

// y (n x out) = x (n x in) * W^T + b, W row-major out x in.
void linear_fwd(const double* x, const double* w, const double* b,
                std::size_t n, std::size_t in, std::size_t out, double* y) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b[o];
            const double* wr = w + o * in;
            const double* xr = x + i * in;
            for (std::size_t j = 0; j < in; ++j) acc += wr[j] * xr[j];
            y[i * out + o] = acc;
        }
    }
}

void linear_bwd(const double* x, const double* w, const double* dy,
                std::size_t n, std::size_t in, std::size_t out,
                double* dx, double* dw, double* db) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* dyr = dy + i * out;
        const double* xr = x + i * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dyr[o];
            db[o] += g;
            const double* wr = w + o * in;
            double* dwr = dw + o * in;
            for (std::size_t j = 0; j < in; ++j) {
                dwr[j] += g * xr[j];
                if (dx) dx[i * in + j] += g * wr[j];
            }
        }
    }
}

struct LnTape {
    std::vector<double> xhat;  // n x h
    std::vector<double> rstd;  // n
};

void layernorm_fwd(const double* x, const double* g, const double* b,
                   std::size_t n, std::size_t h, double* y, LnTape& tape) {
    tape.xhat.resize(n * h);
    tape.rstd.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = x + i * h;
        double mean = 0.0;
        for (std::size_t j = 0; j < h; ++j) mean += xr[j];
        mean /= static_cast<double>(h);
        double var = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(h);
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        tape.rstd[i] = rstd;
        for (std::size_t j = 0; j < h; ++j) {
            const double xh = (xr[j] - mean) * rstd;
            tape.xhat[i * h + j] = xh;
            y[i * h + j] = g[j] * xh + b[j];
        }
    }
}

void layernorm_bwd(const double* g, const double* dy, std::size_t n, std::size_t h,
                   const LnTape& tape, double* dx, double* dg, double* db) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* dyr = dy + i * h;
        const double* xh = tape.xhat.data() + i * h;
        double sum_dyg = 0.0, sum_dyg_xh = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
            const double dyg = dyr[j] * g[j];
            sum_dyg += dyg;
            sum_dyg_xh += dyg * xh[j];
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
        }
        const double inv_h = 1.0 / static_cast<double>(h);
        for (std::size_t j = 0; j < h; ++j) {
            const double dyg = dyr[j] * g[j];
            dx[i * h + j] += tape.rstd[i] *
                             (dyg - inv_h * sum_dyg - xh[j] * inv_h * sum_dyg_xh);
        }
    }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
           x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

struct AttnTape {
    std::vector<double> q, k, v;    // n x h (pre-rotation)
    std::vector<double> qr, kr;     // heads x n x dh (rotated)
    std::vector<double> probs;      // heads x n x n
    std::vector<double> attn_out;   // n x h (pre-wo)
};

struct BlockTape {
    LnTape ln1;
    std::vector<double> ln1_out;
    AttnTape attn;
    std::vector<double> res1;  // after attention residual
    LnTape ln2;
    std::vector<double> ln2_out;
    std::vector<double> mlp_pre;  // n x m (pre-activation)
    std::vector<double> res2;     // block output
};

struct Tape {
    std::size_t n = 0;
    RopeTables rope;
    std::vector<double> h0;  // after lin_in
    std::vector<BlockTape> blocks;
    LnTape ln_f;
    std::vector<double> ln_f_out;
    std::vector<double> y;  // n x out
};

// Rotates src (n x h laid out per-head) into dst (heads x n x dh).
void rotate_heads(const double* src, std::size_t n, int heads, int dh,
                  const RopeTables& rope, double* dst) {
    const std::size_t h = static_cast<std::size_t>(heads) * dh;
    for (int hd = 0; hd < heads; ++hd) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* c = rope.cos_row(i);
            const double* s = rope.sin_row(i);
            const double* x = src + i * h + static_cast<std::size_t>(hd) * dh;
            double* o = dst + (static_cast<std::size_t>(hd) * n + i) * dh;
            for (int j = 0; j < dh; j += 2) {
                o[j] = x[j] * c[j] - x[j + 1] * s[j];
                o[j + 1] = x[j + 1] * c[j + 1] + x[j] * s[j + 1];
            }
        }
    }
}

// Transpose of rotate_heads: accumulates gradients back to the n x h layout.
void rotate_heads_bwd(const double* d_rot, std::size_t n, int heads, int dh,
                      const RopeTables& rope, double* d_src) {
    const std::size_t h = static_cast<std::size_t>(heads) * dh;
    for (int hd = 0; hd < heads; ++hd) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* c = rope.cos_row(i);
            const double* s = rope.sin_row(i);
            const double* d = d_rot + (static_cast<std::size_t>(hd) * n + i) * dh;
            double* o = d_src + i * h + static_cast<std::size_t>(hd) * dh;
            for (int j = 0; j < dh; j += 2) {
                o[j] += d[j] * c[j] + d[j + 1] * s[j + 1];
                o[j + 1] += -d[j] * s[j] + d[j + 1] * c[j + 1];
            }
        }
    }
}

void attention_fwd(const double* x, const double* params, const SliceMap& map,
                   const std::string& prefix, std::size_t n,
                   const DecoderConfig& cfg, const RopeTables& rope,
                   AttnTape& tape, double* out) {
    const std::size_t h = cfg.hidden;
    const int heads = cfg.heads, dh = cfg.head_dim();
    tape.q.resize(n * h);
    tape.k.resize(n * h);
    tape.v.resize(n * h);
    linear_fwd(x, params + map.offset(prefix + "wq"), params + map.offset(prefix + "bq"),
               n, h, h, tape.q.data());
    linear_fwd(x, params + map.offset(prefix + "wk"), params + map.offset(prefix + "bk"),
               n, h, h, tape.k.data());
    linear_fwd(x, params + map.offset(prefix + "wv"), params + map.offset(prefix + "bv"),
               n, h, h, tape.v.data());

    tape.qr.resize(static_cast<std::size_t>(heads) * n * dh);
    tape.kr.resize(tape.qr.size());
    rotate_heads(tape.q.data(), n, heads, dh, rope, tape.qr.data());
    rotate_heads(tape.k.data(), n, heads, dh, rope, tape.kr.data());

    tape.probs.assign(static_cast<std::size_t>(heads) * n * n, 0.0);
    tape.attn_out.assign(n * h, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int hd = 0; hd < heads; ++hd) {
        const double* qr = tape.qr.data() + static_cast<std::size_t>(hd) * n * dh;
        const double* kr = tape.kr.data() + static_cast<std::size_t>(hd) * n * dh;
        double* probs = tape.probs.data() + static_cast<std::size_t>(hd) * n * n;
        for (std::size_t i = 0; i < n; ++i) {
            double* prow = probs + i * n;
            double max_s = -std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < n; ++m) {
                double dot = 0.0;
                for (int j = 0; j < dh; ++j) dot += qr[i * dh + j] * kr[m * dh + j];
                prow[m] = dot * scale;
                max_s = std::max(max_s, prow[m]);
            }
            double denom = 0.0;
            for (std::size_t m = 0; m < n; ++m) {
                prow[m] = std::exp(prow[m] - max_s);
                denom += prow[m];
            }
            double* orow = tape.attn_out.data() + i * h + static_cast<std::size_t>(hd) * dh;
            for (std::size_t m = 0; m < n; ++m) {
                prow[m] /= denom;
                const double* vr = tape.v.data() + m * h + static_cast<std::size_t>(hd) * dh;
                for (int j = 0; j < dh; ++j) orow[j] += prow[m] * vr[j];
            }
        }
    }
    linear_fwd(tape.attn_out.data(), params + map.offset(prefix + "wo"),
               params + map.offset(prefix + "bo"), n, h, h, out);
}

void attention_bwd(const double* x, const double* params, const SliceMap& map,
                   const std::string& prefix, std::size_t n,
                   const DecoderConfig& cfg, const RopeTables& rope,
                   const AttnTape& tape, const double* d_out,
                   double* dx, double* d_params) {
    const std::size_t h = cfg.hidden;
    const int heads = cfg.heads, dh = cfg.head_dim();

    std::vector<double> d_attn_out(n * h, 0.0);
    linear_bwd(tape.attn_out.data(), params + map.offset(prefix + "wo"), d_out, n, h, h,
               d_attn_out.data(), d_params + map.offset(prefix + "wo"),
               d_params + map.offset(prefix + "bo"));

    std::vector<double> d_qr(static_cast<std::size_t>(heads) * n * dh, 0.0);
    std::vector<double> d_kr(d_qr.size(), 0.0);
    std::vector<double> dv(n * h, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> d_prow(n);

    for (int hd = 0; hd < heads; ++hd) {
        const double* qr = tape.qr.data() + static_cast<std::size_t>(hd) * n * dh;
        const double* kr = tape.kr.data() + static_cast<std::size_t>(hd) * n * dh;
        const double* probs = tape.probs.data() + static_cast<std::size_t>(hd) * n * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double* prow = probs + i * n;
            const double* d_orow = d_attn_out.data() + i * h + static_cast<std::size_t>(hd) * dh;
            // dP and dV
            double dot_dp_p = 0.0;
            for (std::size_t m = 0; m < n; ++m) {
                const double* vr = tape.v.data() + m * h + static_cast<std::size_t>(hd) * dh;
                double* dvr = dv.data() + m * h + static_cast<std::size_t>(hd) * dh;
                double dp = 0.0;
                for (int j = 0; j < dh; ++j) {
                    dp += d_orow[j] * vr[j];
                    dvr[j] += prow[m] * d_orow[j];
                }
                d_prow[m] = dp;
                dot_dp_p += dp * prow[m];
            }
            // softmax backward, then scores -> qr / kr
            for (std::size_t m = 0; m < n; ++m) {
                const double ds = prow[m] * (d_prow[m] - dot_dp_p) * scale;
                for (int j = 0; j < dh; ++j) {
                    d_qr[(static_cast<std::size_t>(hd) * n + i) * dh + j] += ds * kr[m * dh + j];
                    d_kr[(static_cast<std::size_t>(hd) * n + m) * dh + j] += ds * qr[i * dh + j];
                }
            }
        }
    }

    std::vector<double> dq(n * h, 0.0), dk(n * h, 0.0);
    rotate_heads_bwd(d_qr.data(), n, heads, dh, rope, dq.data());
    rotate_heads_bwd(d_kr.data(), n, heads, dh, rope, dk.data());

    linear_bwd(x, params + map.offset(prefix + "wq"), dq.data(), n, h, h, dx,
               d_params + map.offset(prefix + "wq"), d_params + map.offset(prefix + "bq"));
    linear_bwd(x, params + map.offset(prefix + "wk"), dk.data(), n, h, h, dx,
               d_params + map.offset(prefix + "wk"), d_params + map.offset(prefix + "bk"));
    linear_bwd(x, params + map.offset(prefix + "wv"), dv.data(), n, h, h, dx,
               d_params + map.offset(prefix + "wv"), d_params + map.offset(prefix + "bv"));
}

// Full forward to token outputs y (n x out_dim), recording the tape.
void forward_core(const Parameters& params, const LatentSequence& seq,
                  const DecoderConfig& cfg, const SliceMap& map, Tape& tape) {
    const std::size_t n = seq.size();
    const std::size_t h = cfg.hidden;
    if (seq.dim != static_cast<std::size_t>(cfg.in_channels)) {
        throw ValidationError("decoder: sequence dim does not match in_channels");
    }
    const double* p = params.values.data();

    tape.n = n;
    tape.rope = rope_3d(seq.ids, cfg.axes, cfg.theta);
    tape.h0.resize(n * h);
    linear_fwd(seq.tokens.data(), p + map.offset("lin_in.w"), p + map.offset("lin_in.b"),
               n, seq.dim, h, tape.h0.data());

    tape.blocks.resize(cfg.depth);
    const std::vector<double>* x = &tape.h0;
    for (int b = 0; b < cfg.depth; ++b) {
        BlockTape& bt = tape.blocks[b];
        const std::string prefix = "block" + std::to_string(b) + ".";

        bt.ln1_out.resize(n * h);
        layernorm_fwd(x->data(), p + map.offset(prefix + "ln1.g"),
                      p + map.offset(prefix + "ln1.b"), n, h, bt.ln1_out.data(), bt.ln1);

        std::vector<double> attn(n * h);
        attention_fwd(bt.ln1_out.data(), p, map, prefix + "attn.", n, cfg, tape.rope,
                      bt.attn, attn.data());
        bt.res1.resize(n * h);
        for (std::size_t i = 0; i < n * h; ++i) bt.res1[i] = (*x)[i] + attn[i];

        bt.ln2_out.resize(n * h);
        layernorm_fwd(bt.res1.data(), p + map.offset(prefix + "ln2.g"),
                      p + map.offset(prefix + "ln2.b"), n, h, bt.ln2_out.data(), bt.ln2);

        const std::size_t m = cfg.mlp_dim;
        bt.mlp_pre.resize(n * m);
        linear_fwd(bt.ln2_out.data(), p + map.offset(prefix + "mlp.w1"),
                   p + map.offset(prefix + "mlp.b1"), n, h, m, bt.mlp_pre.data());
        std::vector<double> act(n * m);
        for (std::size_t i = 0; i < n * m; ++i) act[i] = gelu(bt.mlp_pre[i]);
        std::vector<double> mlp_out(n * h);
        linear_fwd(act.data(), p + map.offset(prefix + "mlp.w2"),
                   p + map.offset(prefix + "mlp.b2"), n, m, h, mlp_out.data());

        bt.res2.resize(n * h);
        for (std::size_t i = 0; i < n * h; ++i) bt.res2[i] = bt.res1[i] + mlp_out[i];
        x = &bt.res2;
    }

    tape.ln_f_out.resize(n * h);
    layernorm_fwd(x->data(), p + map.offset("ln_f.g"), p + map.offset("ln_f.b"), n, h,
                  tape.ln_f_out.data(), tape.ln_f);

    tape.y.resize(n * cfg.out_dim());
    linear_fwd(tape.ln_f_out.data(), p + map.offset("lin_out.w"),
               p + map.offset("lin_out.b"), n, h, cfg.out_dim(), tape.y.data());
}

// Backward from token-output gradients dy to parameter gradients.
void backward_core(const Parameters& params, const LatentSequence& seq,
                   const DecoderConfig& cfg, const SliceMap& map, const Tape& tape,
                   const std::vector<double>& dy, std::vector<double>& d_params) {
    const std::size_t n = tape.n;
    const std::size_t h = cfg.hidden;
    const double* p = params.values.data();
    double* dp = d_params.data();

    std::vector<double> d_lnf(n * h, 0.0);
    linear_bwd(tape.ln_f_out.data(), p + map.offset("lin_out.w"), dy.data(), n, h,
               cfg.out_dim(), d_lnf.data(), dp + map.offset("lin_out.w"),
               dp + map.offset("lin_out.b"));

    std::vector<double> dx(n * h, 0.0);
    layernorm_bwd(p + map.offset("ln_f.g"), d_lnf.data(), n, h, tape.ln_f, dx.data(),
                  dp + map.offset("ln_f.g"), dp + map.offset("ln_f.b"));

    for (int b = cfg.depth - 1; b >= 0; --b) {
        const BlockTape& bt = tape.blocks[b];
        const std::string prefix = "block" + std::to_string(b) + ".";
        const std::size_t m = cfg.mlp_dim;

        // dx holds the gradient at the block output (res2 = res1 + mlp_out).
        std::vector<double> d_act(n * m, 0.0);
        {
            std::vector<double> act(n * m);
            for (std::size_t i = 0; i < n * m; ++i) act[i] = gelu(bt.mlp_pre[i]);
            linear_bwd(act.data(), p + map.offset(prefix + "mlp.w2"), dx.data(), n, m, h,
                       d_act.data(), dp + map.offset(prefix + "mlp.w2"),
                       dp + map.offset(prefix + "mlp.b2"));
        }
        for (std::size_t i = 0; i < n * m; ++i) d_act[i] *= gelu_grad(bt.mlp_pre[i]);

        std::vector<double> d_ln2(n * h, 0.0);
        linear_bwd(bt.ln2_out.data(), p + map.offset(prefix + "mlp.w1"), d_act.data(), n,
                   h, m, d_ln2.data(), dp + map.offset(prefix + "mlp.w1"),
                   dp + map.offset(prefix + "mlp.b1"));

        // gradient at res1 = residual path + ln2 path
        layernorm_bwd(p + map.offset(prefix + "ln2.g"), d_ln2.data(), n, h, bt.ln2,
                      dx.data(), dp + map.offset(prefix + "ln2.g"),
                      dp + map.offset(prefix + "ln2.b"));

        std::vector<double> d_ln1(n * h, 0.0);
        attention_bwd(bt.ln1_out.data(), p, map, prefix + "attn.", n, cfg, tape.rope,
                      bt.attn, dx.data(), d_ln1.data(), dp);

        layernorm_bwd(p + map.offset(prefix + "ln1.g"), d_ln1.data(), n, h, bt.ln1,
                      dx.data(), dp + map.offset(prefix + "ln1.g"),
                      dp + map.offset(prefix + "ln1.b"));
    }

    linear_bwd(seq.tokens.data(), p + map.offset("lin_in.w"), dx.data(), n, seq.dim, h,
               nullptr, dp + map.offset("lin_in.w"), dp + map.offset("lin_in.b"));
}

// Places token outputs into per-stream rasters.
DecodedLayers assemble_rasters(const std::vector<double>& y, const LatentSequence& seq,
                               const AnonymousRegionLayout& layout,
                               const DecoderConfig& cfg) {
    const int ppt = cfg.pixels_per_token;
    const int out = cfg.out_dim();
    DecodedLayers dec;
    dec.merged_rgb = Raster(layout.canvas_height, layout.canvas_width, 3);
    dec.background_rgb = Raster(layout.canvas_height, layout.canvas_width, 3);

    std::vector<PixelBox> boxes;  // indexed by layer id
    for (const Region& r : layout.regions) {
        boxes.push_back(r.box());
    }
    for (std::size_t li = 2; li < boxes.size(); ++li) {
        dec.foreground_rgba.emplace_back(boxes[li].height(), boxes[li].width(), 4);
        dec.foreground_boxes.push_back(boxes[li]);
    }

    for (std::size_t nTok = 0; nTok < seq.size(); ++nTok) {
        const TokenId& id = seq.ids[nTok];
        if (id.layer < 0 || id.layer >= static_cast<std::int64_t>(boxes.size())) {
            throw ValidationError("decoder: token id outside layout");
        }
        const double* patch = y.data() + nTok * out;
        const int px0 = static_cast<int>(id.col) * ppt;
        const int py0 = static_cast<int>(id.row) * ppt;
        if (id.layer <= 1) {
            Raster& target = id.layer == 0 ? dec.merged_rgb : dec.background_rgb;
            for (int py = 0; py < ppt; ++py)
                for (int px = 0; px < ppt; ++px)
                    for (int c = 0; c < 3; ++c)
                        target.at(py0 + py, px0 + px, c) =
                            patch[(py * ppt + px) * 4 + c];
        } else {
            Raster& target = dec.foreground_rgba[id.layer - 2];
            const PixelBox& b = boxes[id.layer];
            for (int py = 0; py < ppt; ++py)
                for (int px = 0; px < ppt; ++px)
                    for (int c = 0; c < 4; ++c)
                        target.at(py0 + py - b.y1, px0 + px - b.x1, c) =
                            patch[(py * ppt + px) * 4 + c];
        }
    }
    return dec;
}

// Residual weights: which token-output elements are supervised and by what.
// Returns total weighted element count and accumulates loss / output grads.
struct LossAccum {
    double weighted_sum = 0.0;
    double weight_total = 0.0;
};

double smooth_abs(double r, double delta) {
    const double a = std::abs(r);
    return a > delta ? a : r * r / (2.0 * delta) + delta / 2.0;
}

double smooth_abs_grad(double r, double delta) {
    if (r > delta) return 1.0;
    if (r < -delta) return -1.0;
    return r / delta;
}

enum class LossKind { TrueL1, Smoothed };

// Walks every supervised element once; when d_y is non-null, writes the loss
// gradient with respect to the token outputs (smoothed loss only).
double loss_over_tokens(const std::vector<double>& y, const LatentSequence& seq,
                        const AnonymousRegionLayout& layout, const DecodeTarget& target,
                        const DecoderConfig& cfg, LossKind kind,
                        std::vector<double>* d_y) {
    const int ppt = cfg.pixels_per_token;
    const int out = cfg.out_dim();
    std::vector<PixelBox> boxes;
    for (const Region& r : layout.regions) boxes.push_back(r.box());

    // First pass: total supervision weight (normalizer of the weighted mean).
    double weight_total = 0.0;
    for (std::size_t nTok = 0; nTok < seq.size(); ++nTok) {
        const std::int64_t l = seq.ids[nTok].layer;
        if (l == 0) {
            if (cfg.condition_merged) weight_total += cfg.aux_stream_weight * ppt * ppt * 3;
        } else if (l == 1) {
            if (cfg.condition_background)
                weight_total += cfg.aux_stream_weight * ppt * ppt * 3;
        } else {
            weight_total += ppt * ppt * 4;
        }
    }
    if (weight_total == 0.0) return 0.0;

    double loss = 0.0;
    for (std::size_t nTok = 0; nTok < seq.size(); ++nTok) {
        const TokenId& id = seq.ids[nTok];
        const double* patch = y.data() + nTok * out;
        double* d_patch = d_y ? d_y->data() + nTok * out : nullptr;
        const int px0 = static_cast<int>(id.col) * ppt;
        const int py0 = static_cast<int>(id.row) * ppt;

        const Raster* tgt = nullptr;
        int channels = 4;
        double weight = 1.0;
        int ox = px0, oy = py0;
        if (id.layer == 0) {
            if (!cfg.condition_merged) continue;
            tgt = &target.merged_rgb;
            channels = 3;
            weight = cfg.aux_stream_weight;
        } else if (id.layer == 1) {
            if (!cfg.condition_background) continue;
            tgt = &target.background_rgb;
            channels = 3;
            weight = cfg.aux_stream_weight;
        } else {
            const std::size_t fi = static_cast<std::size_t>(id.layer) - 2;
            if (fi >= target.foreground_rgba.size()) {
                throw ValidationError("loss: token id outside target layers");
            }
            tgt = &target.foreground_rgba[fi];
            ox = px0 - boxes[id.layer].x1;
            oy = py0 - boxes[id.layer].y1;
        }
        for (int py = 0; py < ppt; ++py) {
            for (int px = 0; px < ppt; ++px) {
                for (int c = 0; c < channels; ++c) {
                    const double r = patch[(py * ppt + px) * 4 + c] -
                                     tgt->at(oy + py, ox + px, c);
                    if (kind == LossKind::TrueL1) {
                        loss += weight * std::abs(r);
                    } else {
                        loss += weight * smooth_abs(r, cfg.huber_delta);
                        if (d_patch) {
                            d_patch[(py * ppt + px) * 4 + c] +=
                                weight * smooth_abs_grad(r, cfg.huber_delta) / weight_total;
                        }
                    }
                }
            }
        }
    }
    return loss / weight_total;
}

void check_target_shapes(const DecodeTarget& target,
                         const AnonymousRegionLayout& layout,
                         const DecoderConfig& cfg) {
    if (cfg.condition_merged &&
        (target.merged_rgb.height() != layout.canvas_height ||
         target.merged_rgb.width() != layout.canvas_width ||
         target.merged_rgb.channels() != 3)) {
        throw ValidationError("loss: merged target shape mismatch");
    }
    if (cfg.condition_background &&
        (target.background_rgb.height() != layout.canvas_height ||
         target.background_rgb.width() != layout.canvas_width ||
         target.background_rgb.channels() != 3)) {
        throw ValidationError("loss: background target shape mismatch");
    }
}

}  // namespace

const std::string& Parameters::slice_name(std::size_t i) const {
    for (const auto& [name, span] : slices) {
        if (i >= span.first && i < span.first + span.second) return name;
    }
    throw ValidationError("parameter index out of range");
}

std::size_t parameter_count(const DecoderConfig& cfg) {
    check_config(cfg);
    return build_slice_map(cfg).total;
}

Parameters init_parameters(const DecoderConfig& cfg, std::uint64_t seed) {
    check_config(cfg);
    const SliceMap map = build_slice_map(cfg);
    Parameters params;
    params.slices = map.slices;
    params.values.assign(map.total, 0.0);
    Rng rng(seed);
    for (const auto& [name, span] : map.slices) {
        double* dst = params.values.data() + span.first;
        const bool is_weight = name.ends_with(".w") || name.find(".w") != std::string::npos;
        if (name == "lin_out.w" || name == "lin_out.b") {
            continue;  // zero so step-0 output is the constant output bias
        }
        if (name.ends_with(".g")) {
            std::fill_n(dst, span.second, 1.0);
        } else if (is_weight && !name.ends_with(".b")) {
            for (std::size_t i = 0; i < span.second; ++i) {
                dst[i] = rng.truncated_normal(0.02);
            }
        }
        // biases and ln offsets stay zero
    }
    return params;
}

DecodedLayers decoder_forward(const Parameters& params, const LatentSequence& seq,
                              const AnonymousRegionLayout& layout,
                              const DecoderConfig& cfg) {
    check_config(cfg);
    const SliceMap map = build_slice_map(cfg);
    if (params.size() != map.total) {
        throw ValidationError("decoder_forward: parameter count mismatch");
    }
    Tape tape;
    forward_core(params, seq, cfg, map, tape);
    for (double v : tape.y) {
        if (!std::isfinite(v)) throw NumericError("decoder_forward: non-finite output");
    }
    return assemble_rasters(tape.y, seq, layout, cfg);
}

double l1_loss(const DecodedLayers& pred, const DecodeTarget& target,
               const DecoderConfig& cfg) {
    double sum = 0.0, weight_total = 0.0;
    const auto add = [&](const Raster& p, const Raster& t, double w) {
        if (!p.same_shape(t)) throw ValidationError("l1_loss: shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            sum += w * std::abs(p.data()[i] - t.data()[i]);
        }
        weight_total += w * static_cast<double>(p.size());
    };
    if (cfg.condition_merged) add(pred.merged_rgb, target.merged_rgb, cfg.aux_stream_weight);
    if (cfg.condition_background)
        add(pred.background_rgb, target.background_rgb, cfg.aux_stream_weight);
    if (pred.foreground_rgba.size() != target.foreground_rgba.size()) {
        throw ValidationError("l1_loss: foreground count mismatch");
    }
    for (std::size_t i = 0; i < pred.foreground_rgba.size(); ++i) {
        add(pred.foreground_rgba[i], target.foreground_rgba[i], 1.0);
    }
    return weight_total > 0.0 ? sum / weight_total : 0.0;
}

double training_loss(const DecodedLayers& pred, const DecodeTarget& target,
                     const DecoderConfig& cfg) {
    double sum = 0.0, weight_total = 0.0;
    const auto add = [&](const Raster& p, const Raster& t, double w) {
        if (!p.same_shape(t)) throw ValidationError("training_loss: shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            sum += w * smooth_abs(p.data()[i] - t.data()[i], cfg.huber_delta);
        }
        weight_total += w * static_cast<double>(p.size());
    };
    if (cfg.condition_merged) add(pred.merged_rgb, target.merged_rgb, cfg.aux_stream_weight);
    if (cfg.condition_background)
        add(pred.background_rgb, target.background_rgb, cfg.aux_stream_weight);
    for (std::size_t i = 0; i < pred.foreground_rgba.size(); ++i) {
        add(pred.foreground_rgba[i], target.foreground_rgba[i], 1.0);
    }
    return weight_total > 0.0 ? sum / weight_total : 0.0;
}

std::vector<double> grad(const Parameters& params, const std::vector<Batch>& batch,
                         const DecoderConfig& cfg) {
    check_config(cfg);
    const SliceMap map = build_slice_map(cfg);
    if (params.size() != map.total) {
        throw ValidationError("grad: parameter count mismatch");
    }
    std::vector<double> d_params(map.total, 0.0);
    for (const Batch& item : batch) {
        check_target_shapes(item.target, item.layout, cfg);
        Tape tape;
        forward_core(params, item.seq, cfg, map, tape);
        std::vector<double> dy(tape.y.size(), 0.0);
        loss_over_tokens(tape.y, item.seq, item.layout, item.target, cfg,
                         LossKind::Smoothed, &dy);
        backward_core(params, item.seq, cfg, map, tape, dy, d_params);
    }
    const double inv = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < d_params.size(); ++i) {
        d_params[i] *= inv;
        if (!std::isfinite(d_params[i])) {
            throw NumericError("grad: non-finite gradient in slice " +
                               params.slice_name(i));
        }
    }
    return d_params;
}

double batch_training_loss(const Parameters& params, const std::vector<Batch>& batch,
                           const DecoderConfig& cfg) {
    const SliceMap map = build_slice_map(cfg);
    double total = 0.0;
    for (const Batch& item : batch) {
        Tape tape;
        forward_core(params, item.seq, cfg, map, tape);
        total += loss_over_tokens(tape.y, item.seq, item.layout, item.target, cfg,
                                  LossKind::Smoothed, nullptr);
    }
    return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

double batch_l1_loss(const Parameters& params, const std::vector<Batch>& batch,
                     const DecoderConfig& cfg) {
    const SliceMap map = build_slice_map(cfg);
    double total = 0.0;
    for (const Batch& item : batch) {
        Tape tape;
        forward_core(params, item.seq, cfg, map, tape);
        total += loss_over_tokens(tape.y, item.seq, item.layout, item.target, cfg,
                                  LossKind::TrueL1, nullptr);
    }
    return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

Batch make_batch(const MultiLayerImage& sample, const PipelineConfig& pipe,
                 const DecoderConfig& cfg) {
    if (cfg.pixels_per_token != pipe.token_px()) {
        throw ValidationError("make_batch: pixels_per_token must equal pipeline token size");
    }
    const int cw = sample.background.width();
    const int ch = sample.background.height();

    AnonymousRegionLayout planner_layout;
    planner_layout.canvas_width = cw;
    planner_layout.canvas_height = ch;
    planner_layout.regions.push_back(Region::from_box(0, PixelBox{0, 0, cw, ch}));
    for (const PlacedLayer& fg : sample.foregrounds) {
        planner_layout.regions.push_back(fg.region);
    }
    const AnonymousRegionLayout layout = sequence_layout(planner_layout, pipe);

    const Raster merged =
        sample.merged ? *sample.merged : composite(sample.background, sample.foregrounds);

    const TokenBlock z_mg = crop_and_flatten(toy_encode(merged, pipe),
                                             PixelBox{0, 0, cw, ch}, 0, pipe);
    const TokenBlock z_bg = crop_and_flatten(toy_encode(sample.background, pipe),
                                             PixelBox{0, 0, cw, ch}, 1, pipe);

    Batch batch;
    batch.layout = layout;
    batch.target.merged_rgb = merged;
    batch.target.background_rgb = sample.background;

    std::vector<TokenBlock> z_fg;
    for (std::size_t i = 0; i < sample.foregrounds.size(); ++i) {
        const PlacedLayer& fg = sample.foregrounds[i];
        // Pad to full canvas (transparent elsewhere), gray-encode, encode.
        Raster canvas_rgba(ch, cw, 4, 0.0);
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) canvas_rgba.at(y, x, 3) = -1.0;
        const PixelBox b = fg.region.box();
        for (int y = 0; y < fg.pixels.height(); ++y)
            for (int x = 0; x < fg.pixels.width(); ++x)
                for (int c = 0; c < 4; ++c)
                    canvas_rgba.at(b.y1 + y, b.x1 + x, c) = fg.pixels.at(y, x, c);

        const PixelBox aligned = layout.regions[i + 2].box();
        z_fg.push_back(crop_and_flatten(toy_encode(encode_transparency(canvas_rgba), pipe),
                                        aligned, static_cast<int>(i) + 2, pipe));

        Raster target(aligned.height(), aligned.width(), 4);
        for (int y = 0; y < aligned.height(); ++y)
            for (int x = 0; x < aligned.width(); ++x)
                for (int c = 0; c < 4; ++c)
                    target.at(y, x, c) = canvas_rgba.at(aligned.y1 + y, aligned.x1 + x, c);
        batch.target.foreground_rgba.push_back(std::move(target));
    }

    batch.seq = concat_multilayer(z_mg, z_bg, z_fg);
    return batch;
}

std::vector<TrainRecord> train_overfit(const std::vector<MultiLayerImage>& samples,
                                       const PipelineConfig& pipe,
                                       const DecoderConfig& cfg, int steps, double lr,
                                       std::uint64_t seed, Parameters* out_params) {
    if (samples.empty()) throw ValidationError("train_overfit: need at least one sample");
    std::vector<Batch> batch;
    for (const MultiLayerImage& s : samples) batch.push_back(make_batch(s, pipe, cfg));

    check_config(cfg);
    const SliceMap map = build_slice_map(cfg);
    for (const Batch& item : batch) check_target_shapes(item.target, item.layout, cfg);

    Parameters params = init_parameters(cfg, seed);
    std::vector<TrainRecord> trace;
    std::vector<double> g(map.total);
    const double inv = 1.0 / static_cast<double>(batch.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (int step = 0; step < steps; ++step) {
        // One forward per item serves both the reported L1 and the smoothed
        // gradient; reduction order over items is fixed.
        double l1 = 0.0;
        std::fill(g.begin(), g.end(), 0.0);
        for (const Batch& item : batch) {
            Tape tape;
            forward_core(params, item.seq, cfg, map, tape);
            l1 += loss_over_tokens(tape.y, item.seq, item.layout, item.target, cfg,
                                   LossKind::TrueL1, nullptr);
            std::vector<double> dy(tape.y.size(), 0.0);
            loss_over_tokens(tape.y, item.seq, item.layout, item.target, cfg,
                             LossKind::Smoothed, &dy);
            backward_core(params, item.seq, cfg, map, tape, dy, g);
        }
        l1 *= inv;
        if (!std::isfinite(l1)) break;  // divergence: keep the last good trace
        const auto now = std::chrono::steady_clock::now();
        trace.push_back(TrainRecord{
            step, l1,
            std::chrono::duration_cast<std::chrono::milliseconds>(now - t0).count()});
        for (std::size_t i = 0; i < params.values.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw NumericError("train_overfit: non-finite gradient in slice " +
                                   params.slice_name(i));
            }
            params.values[i] -= lr * inv * g[i];
        }
    }
    if (out_params) *out_params = std::move(params);
    return trace;
}

void save_checkpoint(const std::string& path, const Parameters& params) {
    nlohmann::ordered_json index;
    index["count"] = params.values.size();
    index["slices"] = nlohmann::ordered_json::array();
    for (const auto& [name, span] : params.slices) {
        index["slices"].push_back({{"name", name}, {"offset", span.first},
                                   {"count", span.second}});
    }
    const std::string index_path = path + ".json";
    std::FILE* jf = std::fopen(index_path.c_str(), "wb");
    if (!jf) throw IoError("cannot open for writing: " + index_path);
    const std::string dumped = index.dump(2);
    std::fwrite(dumped.data(), 1, dumped.size(), jf);
    std::fclose(jf);

    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fwrite(params.values.data(), sizeof(double), params.values.size(), f);
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

Parameters load_checkpoint(const std::string& path) {
    const std::string index_path = path + ".json";
    std::FILE* jf = std::fopen(index_path.c_str(), "rb");
    if (!jf) throw IoError("cannot open: " + index_path);
    std::string text;
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof(buf), jf)) > 0) text.append(buf, got);
    std::fclose(jf);

    nlohmann::json index;
    try {
        index = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(std::string("bad checkpoint index: ") + e.what());
    }
    Parameters params;
    params.values.resize(index.at("count").get<std::size_t>());
    for (const auto& s : index.at("slices")) {
        params.slices.emplace_back(
            s.at("name").get<std::string>(),
            std::make_pair(s.at("offset").get<std::size_t>(),
                           s.at("count").get<std::size_t>()));
    }
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + path);
    const bool ok = std::fread(params.values.data(), sizeof(double),
                               params.values.size(), f) == params.values.size();
    std::fclose(f);
    if (!ok) throw IoError("truncated checkpoint: " + path);
    return params;
}

}  // namespace art
