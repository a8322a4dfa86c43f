#include "art/latent.hpp"

#include <cstdio>
#include <cstring>
#include <set>

#include "art/errors.hpp"
#include "art/rng.hpp"

namespace art {

namespace {

// Fixed projection from one vae_downsample^2 x 3 pixel block to a latent
// vector. Rows 0..2 are the per-channel block means; rows 3..11 are the
// per-channel block-level Haar details (horizontal / vertical / diagonal
// half-block contrasts), so edge positions inside a block survive encoding;
// any remaining rows are a seeded random map so distinct blocks stay
// distinguishable.
std::vector<double> projection_matrix(const PipelineConfig& cfg) {
    const int ds = cfg.vae_downsample;
    const int block = ds * ds * 3;
    std::vector<double> proj(static_cast<std::size_t>(cfg.latent_channels) * block, 0.0);
    const double inv_n = 1.0 / (ds * ds);
    const auto row = [&](int r) { return proj.data() + static_cast<std::size_t>(r) * block; };
    for (int c = 0; c < 3 && c < cfg.latent_channels; ++c) {
        for (int py = 0; py < ds; ++py) {
            for (int px = 0; px < ds; ++px) {
                const int i = (py * ds + px) * 3 + c;
                const double sx = px < ds / 2 ? 1.0 : -1.0;
                const double sy = py < ds / 2 ? 1.0 : -1.0;
                row(c)[i] = inv_n;
                if (3 + c < cfg.latent_channels) row(3 + c)[i] = sx * inv_n;
                if (6 + c < cfg.latent_channels) row(6 + c)[i] = sy * inv_n;
                if (9 + c < cfg.latent_channels) row(9 + c)[i] = sx * sy * inv_n;
            }
        }
    }
    Rng rng(0x41525450726f6aULL);  // fixed: the projection is part of the format
    for (int r = 12; r < cfg.latent_channels; ++r) {
        for (int i = 0; i < block; ++i) {
            row(r)[i] = rng.uniform(-1.0, 1.0) * 0.05;
        }
    }
    return proj;
}

}  // namespace

LatentGrid toy_encode(const Raster& image, const PipelineConfig& cfg) {
    if (image.channels() != 3) {
        throw ValidationError("toy_encode: expected H x W x 3 input");
    }
    const int ds = cfg.vae_downsample;
    if (image.height() % ds != 0 || image.width() % ds != 0) {
        throw ValidationError("toy_encode: dimensions not divisible by vae_downsample");
    }
    const std::vector<double> proj = projection_matrix(cfg);
    const int block = ds * ds * 3;

    LatentGrid grid;
    grid.rows = image.height() / ds;
    grid.cols = image.width() / ds;
    grid.channels = cfg.latent_channels;
    grid.values.assign(static_cast<std::size_t>(grid.rows) * grid.cols * grid.channels, 0.0);

    std::vector<double> buf(block);
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            int i = 0;
            for (int py = 0; py < ds; ++py) {
                for (int px = 0; px < ds; ++px) {
                    for (int ch = 0; ch < 3; ++ch) {
                        buf[i++] = image.at(r * ds + py, c * ds + px, ch);
                    }
                }
            }
            for (int out = 0; out < grid.channels; ++out) {
                double acc = 0.0;
                const double* row = proj.data() + static_cast<std::size_t>(out) * block;
                for (int j = 0; j < block; ++j) acc += row[j] * buf[j];
                grid.at(r, c, out) = acc;
            }
        }
    }
    return grid;
}

Raster toy_decode_pixels(const LatentGrid& latent, const PipelineConfig& cfg) {
    const int ds = cfg.vae_downsample;
    Raster out(latent.rows * ds, latent.cols * ds, 3);
    for (int r = 0; r < latent.rows; ++r) {
        for (int c = 0; c < latent.cols; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                const double v = latent.at(r, c, ch);
                for (int py = 0; py < ds; ++py) {
                    for (int px = 0; px < ds; ++px) {
                        out.at(r * ds + py, c * ds + px, ch) = v;
                    }
                }
            }
        }
    }
    return out;
}

TokenBlock crop_and_flatten(const LatentGrid& latent, const PixelBox& region_px,
                            int layer_index, const PipelineConfig& cfg) {
    const int tpx = cfg.token_px();
    if (region_px.x1 % tpx != 0 || region_px.y1 % tpx != 0 ||
        region_px.width() % tpx != 0 || region_px.height() % tpx != 0) {
        throw ValidationError("crop_and_flatten: region not token-aligned");
    }
    const int ds = cfg.vae_downsample;
    if (region_px.x2 > latent.cols * ds || region_px.y2 > latent.rows * ds ||
        region_px.x1 < 0 || region_px.y1 < 0) {
        throw ValidationError("crop_and_flatten: region outside latent extent");
    }
    const int p = cfg.patch_size;
    const int token_rows = region_px.height() / tpx;
    const int token_cols = region_px.width() / tpx;
    const int row0 = region_px.y1 / tpx;
    const int col0 = region_px.x1 / tpx;

    TokenBlock block;
    block.dim = static_cast<std::size_t>(cfg.token_dim());
    block.tokens.reserve(static_cast<std::size_t>(token_rows) * token_cols * block.dim);
    block.ids.reserve(static_cast<std::size_t>(token_rows) * token_cols);

    for (int tr = 0; tr < token_rows; ++tr) {
        for (int tc = 0; tc < token_cols; ++tc) {
            // One token = a patch_size x patch_size group of latent cells,
            // cell-major with channels contiguous.
            for (int pr = 0; pr < p; ++pr) {
                for (int pc = 0; pc < p; ++pc) {
                    const int lr = (row0 + tr) * p + pr;
                    const int lc = (col0 + tc) * p + pc;
                    for (int ch = 0; ch < latent.channels; ++ch) {
                        block.tokens.push_back(latent.at(lr, lc, ch));
                    }
                }
            }
            block.ids.push_back(TokenId{layer_index, row0 + tr, col0 + tc});
        }
    }
    return block;
}

LatentSequence concat_multilayer(const TokenBlock& merged, const TokenBlock& background,
                                 const std::vector<TokenBlock>& foregrounds) {
    LatentSequence seq;
    seq.dim = merged.dim;

    const auto append = [&seq](const TokenBlock& block, const std::string& name,
                               std::int64_t layer_id) {
        if (block.dim != seq.dim) {
            throw ValidationError("concat_multilayer: token dim mismatch in " + name);
        }
        seq.segments.push_back(Segment{name, seq.ids.size(), block.size()});
        seq.tokens.insert(seq.tokens.end(), block.tokens.begin(), block.tokens.end());
        for (TokenId id : block.ids) {
            id.layer = layer_id;
            seq.ids.push_back(id);
        }
    };

    append(merged, "merged", 0);
    append(background, "background", 1);
    for (std::size_t i = 0; i < foregrounds.size(); ++i) {
        append(foregrounds[i], "fg" + std::to_string(i + 1),
               static_cast<std::int64_t>(i) + 2);
    }
    return seq;
}

std::vector<TokenBlock> split_segments(const LatentSequence& seq) {
    std::vector<TokenBlock> blocks;
    for (const Segment& s : seq.segments) {
        TokenBlock b;
        b.dim = seq.dim;
        b.tokens.assign(seq.tokens.begin() + s.offset * seq.dim,
                        seq.tokens.begin() + (s.offset + s.count) * seq.dim);
        b.ids.assign(seq.ids.begin() + s.offset, seq.ids.begin() + s.offset + s.count);
        blocks.push_back(std::move(b));
    }
    return blocks;
}

std::vector<TokenId> prepare_latent_image_ids(const AnonymousRegionLayout& layout,
                                              const PipelineConfig& cfg) {
    const int tpx = cfg.token_px();
    if (layout.canvas_width % tpx != 0 || layout.canvas_height % tpx != 0) {
        throw ValidationError("prepare_latent_image_ids: canvas not token-aligned");
    }
    const int grid_rows = layout.canvas_height / tpx;
    const int grid_cols = layout.canvas_width / tpx;

    std::vector<TokenId> out;
    for (const Region& region : layout.regions) {
        const PixelBox b = region.box();
        if (b.x1 % tpx != 0 || b.y1 % tpx != 0 || b.width() % tpx != 0 ||
            b.height() % tpx != 0) {
            throw ValidationError("prepare_latent_image_ids: region not token-aligned");
        }
        // Full canvas grid of (layer, row, col), cropped to the region's
        // token box, flattened row-major.
        const int y1 = b.y1 / tpx, y2 = b.y2 / tpx;
        const int x1 = b.x1 / tpx, x2 = b.x2 / tpx;
        if (y2 > grid_rows || x2 > grid_cols) {
            throw ValidationError("prepare_latent_image_ids: region outside canvas");
        }
        for (int r = y1; r < y2; ++r) {
            for (int c = x1; c < x2; ++c) {
                out.push_back(TokenId{region.layer_index, r, c});
            }
        }
    }
    return out;
}

AnonymousRegionLayout sequence_layout(const AnonymousRegionLayout& layout,
                                      const PipelineConfig& cfg) {
    AnonymousRegionLayout seq;
    seq.canvas_width = layout.canvas_width;
    seq.canvas_height = layout.canvas_height;
    const PixelBox canvas{0, 0, layout.canvas_width, layout.canvas_height};
    seq.regions.push_back(Region::from_box(0, canvas));  // merged
    seq.regions.push_back(Region::from_box(1, canvas));  // background
    int next = 2;
    for (const Region& r : layout.regions) {
        if (r.layer_index == 0) continue;  // planner background entry
        const PixelBox aligned = ceiling_aligned_crop(
            r.box(), layout.canvas_width, layout.canvas_height, cfg.token_px());
        seq.regions.push_back(Region::from_box(next++, aligned));
    }
    return seq;
}

void write_latent_dump(const std::string& path, const LatentSequence& seq) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    const std::int64_t header[3] = {static_cast<std::int64_t>(seq.size()),
                                    static_cast<std::int64_t>(seq.dim), 3};
    std::fwrite(header, sizeof(std::int64_t), 3, f);
    std::fwrite(seq.tokens.data(), sizeof(double), seq.tokens.size(), f);
    for (const TokenId& id : seq.ids) {
        const std::int64_t row[3] = {id.layer, id.row, id.col};
        std::fwrite(row, sizeof(std::int64_t), 3, f);
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

LatentSequence read_latent_dump(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + path);
    std::int64_t header[3] = {0, 0, 0};
    if (std::fread(header, sizeof(std::int64_t), 3, f) != 3 || header[2] != 3 ||
        header[0] < 0 || header[1] < 0) {
        std::fclose(f);
        throw IoError("bad latent dump header: " + path);
    }
    LatentSequence seq;
    seq.dim = static_cast<std::size_t>(header[1]);
    const std::size_t n = static_cast<std::size_t>(header[0]);
    seq.tokens.resize(n * seq.dim);
    bool ok = std::fread(seq.tokens.data(), sizeof(double), seq.tokens.size(), f) ==
              seq.tokens.size();
    seq.ids.resize(n);
    for (std::size_t i = 0; ok && i < n; ++i) {
        std::int64_t row[3];
        ok = std::fread(row, sizeof(std::int64_t), 3, f) == 3;
        if (ok) seq.ids[i] = TokenId{row[0], row[1], row[2]};
    }
    std::fclose(f);
    if (!ok) throw IoError("truncated latent dump: " + path);
    return seq;
}

}  // namespace art
