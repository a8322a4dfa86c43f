#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "art/layout.hpp"
#include "art/raster.hpp"

namespace art {

/// Geometry constants shared by the latent pipeline. The layout alignment
/// unit equals vae_downsample * patch_size (16 px by default).
struct PipelineConfig {
    int vae_downsample = 8;
    int patch_size = 2;
    int latent_channels = 16;

    int token_px() const { return vae_downsample * patch_size; }
    int token_dim() const { return latent_channels * patch_size * patch_size; }
};

/// Latent feature grid at 1/vae_downsample of pixel resolution.
struct LatentGrid {
    int rows = 0;
    int cols = 0;
    int channels = 0;
    std::vector<double> values;  // row-major rows x cols x channels

    double& at(int r, int c, int ch) {
        return values[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
    }
    double at(int r, int c, int ch) const {
        return values[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
    }
};

/// 3D position id of one token: (layer, row, col) in token-grid units.
struct TokenId {
    std::int64_t layer = 0;
    std::int64_t row = 0;
    std::int64_t col = 0;

    bool operator==(const TokenId&) const = default;
    auto operator<=>(const TokenId&) const = default;
};

/// Token range contributed by one source stream.
struct Segment {
    std::string name;  // "merged", "background", "fg1", "fg2", ...
    std::size_t offset = 0;
    std::size_t count = 0;
};

/// Concatenated per-stream latent tokens with per-token 3D ids.
/// Segment order is merged, background, fg 1..K.
struct LatentSequence {
    std::size_t dim = 0;
    std::vector<double> tokens;  // N x dim, row-major
    std::vector<TokenId> ids;    // N
    std::vector<Segment> segments;

    std::size_t size() const { return ids.size(); }
    const double* token(std::size_t n) const { return tokens.data() + n * dim; }
    double* token(std::size_t n) { return tokens.data() + n * dim; }
};

/// Tokens and ids for one cropped stream before concatenation.
struct TokenBlock {
    std::size_t dim = 0;
    std::vector<double> tokens;
    std::vector<TokenId> ids;

    std::size_t size() const { return ids.size(); }
};

/// Deterministic stand-in encoder: each vae_downsample^2 pixel block maps to
/// one latent vector through a fixed seed-derived linear projection. The
/// first three projection rows are the per-channel block means, so block
/// means are exactly recoverable.
LatentGrid toy_encode(const Raster& image, const PipelineConfig& cfg);

/// Per-block mean reconstruction from the first three latent channels;
/// the decoding counterpart of toy_encode's mean rows.
Raster toy_decode_pixels(const LatentGrid& latent, const PipelineConfig& cfg);

/// Crops the latent to region_px (which must be token-aligned), packs
/// patch_size x patch_size latent cells into tokens row-major, and assigns
/// canvas-absolute (layer, row, col) ids.
TokenBlock crop_and_flatten(const LatentGrid& latent, const PixelBox& region_px,
                            int layer_index, const PipelineConfig& cfg);

/// Concatenates merged, background, and foreground token blocks into one
/// sequence. Layer ids are reassigned canonically: merged = 0, background = 1,
/// foreground i = i + 1.
LatentSequence concat_multilayer(const TokenBlock& merged, const TokenBlock& background,
                                 const std::vector<TokenBlock>& foregrounds);

/// Splits a sequence back into its per-segment blocks.
std::vector<TokenBlock> split_segments(const LatentSequence& seq);

/// Position ids straight from a layout: for each region (in list order, using
/// its layer_index as the layer id) build the full canvas token grid of
/// (layer, row, col) ids, crop to the region's token box, flatten row-major,
/// and concatenate. Bit-identical to the ids assembled by crop_and_flatten +
/// concat_multilayer on the matching sequence layout.
/// All regions must be token-aligned.
std::vector<TokenId> prepare_latent_image_ids(const AnonymousRegionLayout& layout,
                                              const PipelineConfig& cfg);

/// Rewrites a planner layout (bg at index 0, fg 1..K) as the sequence layout
/// the token stream follows: full-canvas merged (layer 0), full-canvas
/// background (layer 1), then each foreground's ceiling-aligned crop box at
/// layer i + 1.
AnonymousRegionLayout sequence_layout(const AnonymousRegionLayout& layout,
                                      const PipelineConfig& cfg);

/// Binary dump: little-endian i64 header (N, D, 3), N*D f64 token payload,
/// then N*3 i64 ids.
void write_latent_dump(const std::string& path, const LatentSequence& seq);
LatentSequence read_latent_dump(const std::string& path);

}  // namespace art
