#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "art/attention.hpp"
#include "art/errors.hpp"
#include "art/rng.hpp"

using namespace art;

namespace {

AttentionConfig small_cfg() {
    AttentionConfig cfg;
    cfg.heads = 2;
    cfg.head_dim = 12;
    cfg.axes = AxesDim{4, 4, 4};
    return cfg;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

// Naive reference: per query row, score every allowed key through the
// pairwise rotary dot product, softmax over the allowed set, then blend the
// value rows. Independent of attend's batched rotation/table code path.
std::vector<double> masked_attention_oracle(const std::vector<double>& q,
                                            const std::vector<double>& k,
                                            const std::vector<double>& v,
                                            const std::vector<TokenId>& ids,
                                            const std::vector<bool>& allowed,
                                            const AttentionConfig& cfg) {
    const std::size_t n = ids.size();
    const std::size_t model = static_cast<std::size_t>(cfg.model_dim());
    const int dh = cfg.head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> out(n * model, 0.0);
    for (int h = 0; h < cfg.heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * dh;
        for (std::size_t i = 0; i < n; ++i) {
            if (!allowed[i]) continue;
            std::vector<double> w;
            std::vector<std::size_t> keys;
            for (std::size_t m = 0; m < n; ++m) {
                if (!allowed[m]) continue;
                const double s = attention_score(
                    std::span<const double>(q.data() + i * model + off, dh),
                    std::span<const double>(k.data() + m * model + off, dh),
                    ids[i], ids[m], cfg.axes, cfg.theta);
                w.push_back(s * scale);
                keys.push_back(m);
            }
            const double mx = *std::max_element(w.begin(), w.end());
            double denom = 0.0;
            for (double& x : w) {
                x = std::exp(x - mx);
                denom += x;
            }
            for (std::size_t t = 0; t < keys.size(); ++t) {
                const double p = w[t] / denom;
                for (int j = 0; j < dh; ++j) {
                    out[i * model + off + j] += p * v[keys[t] * model + off + j];
                }
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("attend on one token returns its value vector") {
    Rng rng(101);
    const AttentionConfig cfg = small_cfg();
    const std::size_t model = cfg.model_dim();
    const std::vector<double> q = random_vec(rng, model);
    const std::vector<double> k = random_vec(rng, model);
    const std::vector<double> v = random_vec(rng, model);
    const std::vector<TokenId> ids = {TokenId{3, 5, 7}};
    const std::vector<double> out = attend(q, k, v, ids, cfg);
    REQUIRE(out.size() == model);
    for (std::size_t j = 0; j < model; ++j) {
        CHECK(out[j] == doctest::Approx(v[j]).epsilon(1e-12));
    }
}

TEST_CASE("attend with equal ids and equal keys averages the values") {
    Rng rng(103);
    const AttentionConfig cfg = small_cfg();
    const std::size_t model = cfg.model_dim();
    const std::size_t n = 6;
    const std::vector<double> key_row = random_vec(rng, model);
    std::vector<double> q = random_vec(rng, n * model);
    std::vector<double> k(n * model);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(key_row.begin(), key_row.end(), k.begin() + i * model);
    }
    const std::vector<double> v = random_vec(rng, n * model);
    const std::vector<TokenId> ids(n, TokenId{1, 2, 3});
    const std::vector<double> out = attend(q, k, v, ids, cfg);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < model; ++j) {
            double mean = 0.0;
            for (std::size_t m = 0; m < n; ++m) mean += v[m * model + j];
            mean /= static_cast<double>(n);
            CHECK(out[i * model + j] == doctest::Approx(mean).epsilon(1e-12));
        }
    }
}

TEST_CASE("attend is equivariant under joint token/id permutation") {
    Rng rng(107);
    const AttentionConfig cfg = small_cfg();
    const std::size_t model = cfg.model_dim();
    const std::size_t n = 9;
    const std::vector<double> q = random_vec(rng, n * model);
    const std::vector<double> k = random_vec(rng, n * model);
    const std::vector<double> v = random_vec(rng, n * model);
    std::vector<TokenId> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(TokenId{static_cast<std::int64_t>(i % 3),
                              static_cast<std::int64_t>(i / 3),
                              static_cast<std::int64_t>(i)});
    }
    const std::vector<double> base = attend(q, k, v, ids, cfg);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(perm[i - 1], perm[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
    }
    std::vector<double> qp(n * model), kp(n * model), vp(n * model);
    std::vector<TokenId> idp(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(q.data() + perm[i] * model, model, qp.data() + i * model);
        std::copy_n(k.data() + perm[i] * model, model, kp.data() + i * model);
        std::copy_n(v.data() + perm[i] * model, model, vp.data() + i * model);
        idp[i] = ids[perm[i]];
    }
    const std::vector<double> permuted = attend(qp, kp, vp, idp, cfg);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < model; ++j) {
            CHECK(std::abs(permuted[i * model + j] - base[perm[i] * model + j]) < 1e-12);
        }
    }
}

TEST_CASE("attend output rows are convex combinations of value rows") {
    // With every value row set to one constant vector, the output must equal
    // that constant exactly if the softmax weights sum to one.
    Rng rng(109);
    const AttentionConfig cfg = small_cfg();
    const std::size_t model = cfg.model_dim();
    const std::size_t n = 12;
    const std::vector<double> q = random_vec(rng, n * model);
    const std::vector<double> k = random_vec(rng, n * model);
    const std::vector<double> constant = random_vec(rng, model);
    std::vector<double> v(n * model);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(constant.begin(), constant.end(), v.begin() + i * model);
    }
    std::vector<TokenId> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(TokenId{0, static_cast<std::int64_t>(i / 4),
                              static_cast<std::int64_t>(i % 4)});
    }
    const std::vector<double> out = attend(q, k, v, ids, cfg);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < model; ++j) {
            CHECK(std::abs(out[i * model + j] - constant[j]) < 1e-12);
        }
    }
}

TEST_CASE("attend matches the pairwise-score oracle on full sequences") {
    Rng rng(113);
    const AttentionConfig cfg = small_cfg();
    const std::size_t model = cfg.model_dim();
    const std::size_t n = 16;
    const std::vector<double> q = random_vec(rng, n * model);
    const std::vector<double> k = random_vec(rng, n * model);
    const std::vector<double> v = random_vec(rng, n * model);
    std::vector<TokenId> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(TokenId{2, static_cast<std::int64_t>(i / 4),
                              static_cast<std::int64_t>(i % 4)});
    }
    const std::vector<double> fast = attend(q, k, v, ids, cfg);
    const std::vector<double> slow =
        masked_attention_oracle(q, k, v, ids, std::vector<bool>(n, true), cfg);
    for (std::size_t j = 0; j < fast.size(); ++j) {
        CHECK(std::abs(fast[j] - slow[j]) <= 1e-9);
    }
}

TEST_CASE("regional crop equals masked full-grid attention") {
    // 8x8 grid; the region keeps a 3x4 sub-box. Attending over the cropped
    // subsequence must match the full-grid oracle with off-region rows masked.
    Rng rng(127);
    const AttentionConfig cfg = small_cfg();
    const std::size_t model = cfg.model_dim();
    const int rows = 8, cols = 8;
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    const std::vector<double> q = random_vec(rng, n * model);
    const std::vector<double> k = random_vec(rng, n * model);
    const std::vector<double> v = random_vec(rng, n * model);
    std::vector<TokenId> ids;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) ids.push_back(TokenId{1, r, c});

    std::vector<bool> allowed(n, false);
    std::vector<double> qc, kc, vc;
    std::vector<TokenId> idc;
    std::vector<std::size_t> keep;
    for (int r = 2; r < 5; ++r) {
        for (int c = 3; c < 7; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * cols + c;
            allowed[i] = true;
            keep.push_back(i);
            qc.insert(qc.end(), q.begin() + i * model, q.begin() + (i + 1) * model);
            kc.insert(kc.end(), k.begin() + i * model, k.begin() + (i + 1) * model);
            vc.insert(vc.end(), v.begin() + i * model, v.begin() + (i + 1) * model);
            idc.push_back(ids[i]);
        }
    }

    const std::vector<double> cropped = attend(qc, kc, vc, idc, cfg);
    const std::vector<double> masked =
        masked_attention_oracle(q, k, v, ids, allowed, cfg);
    for (std::size_t t = 0; t < keep.size(); ++t) {
        for (std::size_t j = 0; j < model; ++j) {
            CHECK(std::abs(cropped[t * model + j] - masked[keep[t] * model + j]) <= 1e-9);
        }
    }
}

TEST_CASE("attend rejects mismatched buffer sizes") {
    const AttentionConfig cfg = small_cfg();
    const std::vector<TokenId> ids = {TokenId{0, 0, 0}, TokenId{0, 0, 1}};
    const std::vector<double> ok(2 * cfg.model_dim(), 0.0);
    const std::vector<double> bad(cfg.model_dim(), 0.0);
    CHECK_THROWS_AS(attend(bad, ok, ok, ids, cfg), ValidationError);
    CHECK_THROWS_AS(attend(ok, bad, ok, ids, cfg), ValidationError);
    AttentionConfig wrong = cfg;
    wrong.axes = AxesDim{4, 4, 2};
    CHECK_THROWS_AS(attend(ok, ok, ok, ids, wrong), ValidationError);
}

TEST_CASE("spatial-temporal with one layer equals spatial-only attention") {
    Rng rng(131);
    const AttentionConfig cfg = small_cfg();
    const std::size_t model = cfg.model_dim();
    LayerGrid grid;
    grid.rows = 3;
    grid.cols = 4;
    const std::size_t g = 12;
    grid.q = random_vec(rng, g * model);
    grid.k = random_vec(rng, g * model);
    grid.v = random_vec(rng, g * model);

    const auto st = attend_spatial_temporal({grid}, cfg);
    REQUIRE(st.size() == 1);

    std::vector<TokenId> ids;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) ids.push_back(TokenId{0, r, c});
    const std::vector<double> spatial = attend(grid.q, grid.k, grid.v, ids, cfg);
    // Length-1 temporal softmax passes the spatial output straight through.
    for (std::size_t j = 0; j < spatial.size(); ++j) {
        CHECK(std::abs(st[0][j] - spatial[j]) < 1e-12);
    }
}

TEST_CASE("spatial-temporal with identical layers reduces to the spatial pass") {
    Rng rng(137);
    const AttentionConfig cfg = small_cfg();
    const std::size_t model = cfg.model_dim();
    LayerGrid grid;
    grid.rows = 2;
    grid.cols = 3;
    const std::size_t g = 6;
    grid.q = random_vec(rng, g * model);
    grid.k = random_vec(rng, g * model);
    grid.v = random_vec(rng, g * model);

    const auto st = attend_spatial_temporal({grid, grid, grid}, cfg);
    REQUIRE(st.size() == 3);

    std::vector<TokenId> ids;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) ids.push_back(TokenId{0, r, c});
    const std::vector<double> spatial = attend(grid.q, grid.k, grid.v, ids, cfg);
    // Temporal softmax over identical value rows returns that shared row.
    for (const auto& layer_out : st) {
        for (std::size_t j = 0; j < spatial.size(); ++j) {
            CHECK(std::abs(layer_out[j] - spatial[j]) <= 1e-9);
        }
    }
}

TEST_CASE("spatial-temporal rejects ragged grids") {
    const AttentionConfig cfg = small_cfg();
    LayerGrid a, b;
    a.rows = b.rows = 2;
    a.cols = 2;
    b.cols = 3;
    a.q = a.k = a.v = std::vector<double>(4 * cfg.model_dim(), 0.0);
    b.q = b.k = b.v = std::vector<double>(6 * cfg.model_dim(), 0.0);
    CHECK_THROWS_AS(attend_spatial_temporal({a, b}, cfg), ValidationError);
}

namespace {

AnonymousRegionLayout uniform_layout(int canvas, int region, int k) {
    AnonymousRegionLayout layout;
    layout.canvas_width = canvas;
    layout.canvas_height = canvas;
    layout.regions.push_back(Region::from_box(0, PixelBox{0, 0, canvas, canvas}));
    for (int i = 1; i <= k; ++i) {
        layout.regions.push_back(Region::from_box(i, PixelBox{0, 0, region, region}));
    }
    return layout;
}

}  // namespace

TEST_CASE("cost_report reproduces the 1024-canvas 64px-region fixtures") {
    const PipelineConfig pipe;
    const AttentionConfig cfg;  // heads = 4, context 0

    const auto layout50 = uniform_layout(1024, 64, 50);
    const CostReport reg = cost_report(layout50, SchemeKind::RegionalFull, pipe, cfg);
    CHECK(reg.total_tokens == 8992);  // 4096 + 4096 + 50 * 16
    CHECK(reg.attention_pairs == 8992LL * 8992LL);
    CHECK(reg.est_activation_memory == reg.attention_pairs * 4 * cfg.heads);

    const CostReport full = cost_report(layout50, SchemeKind::Full, pipe, cfg);
    CHECK(full.total_tokens == 212992);  // 8192 + 50 * 4096
    CHECK(full.attention_pairs == 212992LL * 212992LL);

    const double pair_ratio = static_cast<double>(full.attention_pairs) /
                              static_cast<double>(reg.attention_pairs);
    CHECK(pair_ratio >= 12.0);
    CHECK(pair_ratio == doctest::Approx(561.0).epsilon(0.01));

    const auto layout10 = uniform_layout(1024, 64, 10);
    CHECK(cost_report(layout10, SchemeKind::RegionalFull, pipe, cfg).total_tokens == 8352);
    CHECK(cost_report(layout10, SchemeKind::Full, pipe, cfg).total_tokens == 49152);
}

TEST_CASE("cost_report with zero foregrounds agrees across schemes") {
    const PipelineConfig pipe;
    const AttentionConfig cfg;
    const auto layout = uniform_layout(512, 64, 0);
    const long long expect = 2 * 1024;  // merged + background streams
    for (SchemeKind s : {SchemeKind::RegionalFull, SchemeKind::Full,
                         SchemeKind::SpatialTemporal}) {
        const CostReport r = cost_report(layout, s, pipe, cfg);
        CHECK(r.total_tokens == expect);
        CHECK(r.attention_pairs >= r.total_tokens);
    }
}

TEST_CASE("cost_report spatial-temporal pair formula") {
    const PipelineConfig pipe;
    const AttentionConfig cfg;
    const auto layout = uniform_layout(512, 64, 3);  // n_canvas = 1024, K = 3
    const CostReport r = cost_report(layout, SchemeKind::SpatialTemporal, pipe, cfg);
    CHECK(r.total_tokens == 5 * 1024);
    CHECK(r.attention_pairs == 5LL * 1024 * 1024 + 1024LL * 5 * 5);
}

TEST_CASE("cost_report regional token average matches the dataset-scale anchor") {
    // An 11-layer-average design family: 512 px canvas, 18 foregrounds of
    // 368 px square (23x23 = 529 tokens). Regional totals land near 11.38K
    // while uncropped totals are exactly 20.48K.
    const PipelineConfig pipe;
    const AttentionConfig cfg;
    AnonymousRegionLayout layout;
    layout.canvas_width = 512;
    layout.canvas_height = 512;
    layout.regions.push_back(Region::from_box(0, PixelBox{0, 0, 512, 512}));
    for (int i = 1; i <= 18; ++i) {
        layout.regions.push_back(Region::from_box(i, PixelBox{16, 16, 384, 384}));
    }
    const CostReport reg = cost_report(layout, SchemeKind::RegionalFull, pipe, cfg);
    CHECK(reg.total_tokens == 2048 + 18 * 529);
    CHECK(std::abs(static_cast<double>(reg.total_tokens) - 11380.0) / 11380.0 < 0.05);
    const CostReport full = cost_report(layout, SchemeKind::Full, pipe, cfg);
    CHECK(full.total_tokens == 20480);
    CHECK(full.total_tokens >= reg.total_tokens);
}

TEST_CASE("context tokens are added to every scheme") {
    const PipelineConfig pipe;
    AttentionConfig cfg;
    cfg.context_tokens = 77;
    const auto layout = uniform_layout(512, 64, 2);
    const CostReport reg = cost_report(layout, SchemeKind::RegionalFull, pipe, cfg);
    CHECK(reg.total_tokens == 77 + 2048 + 2 * 16);
    const CostReport st = cost_report(layout, SchemeKind::SpatialTemporal, pipe, cfg);
    CHECK(st.total_tokens == 77 + 4 * 1024);
    CHECK(st.attention_pairs ==
          4LL * (77 + 1024) * (77 + 1024) + 1024LL * (77 + 4) * (77 + 4));
}

TEST_CASE("scaling_sweep regional growth stays under 1.25x while full exceeds 15x") {
    const PipelineConfig pipe;
    const AttentionConfig cfg;
    const auto regional = scaling_sweep(1024, 1024, 64, 64, 10, 50,
                                        SchemeKind::RegionalFull, pipe, cfg);
    REQUIRE(regional.size() == 41);
    CHECK(regional.front().tokens == 8352);
    CHECK(regional.back().tokens == 8992);
    const double reg_growth = static_cast<double>(regional.back().pairs) /
                              static_cast<double>(regional.front().pairs);
    CHECK(reg_growth <= 1.25);
    CHECK(reg_growth == doctest::Approx(1.16).epsilon(0.01));

    const auto full =
        scaling_sweep(1024, 1024, 64, 64, 10, 50, SchemeKind::Full, pipe, cfg);
    const double full_growth = static_cast<double>(full.back().pairs) /
                               static_cast<double>(full.front().pairs);
    CHECK(full_growth >= 15.0);
    CHECK(full_growth == doctest::Approx(18.8).epsilon(0.01));

    for (std::size_t i = 1; i < regional.size(); ++i) {
        CHECK(regional[i].k == regional[i - 1].k + 1);
        CHECK(regional[i].pairs > regional[i - 1].pairs);
    }
}

TEST_CASE("sweep_to_csv emits the documented header and one row per K") {
    const PipelineConfig pipe;
    const AttentionConfig cfg;
    const auto rows =
        scaling_sweep(256, 256, 64, 64, 1, 3, SchemeKind::RegionalFull, pipe, cfg);
    const std::string csv = sweep_to_csv(rows);
    CHECK(csv.rfind("k,tokens,pairs,est_memory_bytes\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    // n_canvas = 256, region tokens = 16 each.
    CHECK(csv.find("1,528,278784,") != std::string::npos);
}

TEST_CASE("scheme names round-trip") {
    for (SchemeKind s : {SchemeKind::RegionalFull, SchemeKind::Full,
                         SchemeKind::SpatialTemporal}) {
        CHECK(scheme_from_name(scheme_name(s)) == s);
    }
    CHECK_THROWS_AS(scheme_from_name("bogus"), ValidationError);
}

TEST_CASE("scaling_sweep rejects an empty K range") {
    const PipelineConfig pipe;
    const AttentionConfig cfg;
    CHECK_THROWS_AS(
        scaling_sweep(256, 256, 64, 64, 5, 4, SchemeKind::Full, pipe, cfg),
        ValidationError);
}
