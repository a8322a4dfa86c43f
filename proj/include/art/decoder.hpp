#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "art/latent.hpp"
#include "art/rope.hpp"
#include "art/transparency.hpp"

namespace art {

/// Toy-scale multi-layer transparency decoder: linear-in, pre-norm ViT
/// blocks with 3D-RoPE attention, linear-out, per-token RGBA patch reshape.
struct DecoderConfig {
    int depth = 2;
    int hidden = 64;
    int mlp_dim = 128;
    int heads = 4;
    int in_channels = 16;       // latent token dim; 16 on the unpatched path
    AxesDim axes{4, 6, 6};      // per-head split; sum must equal hidden/heads
    double theta = 10000.0;
    int pixels_per_token = 8;   // vae_downsample * patch_size of the input seq
    bool condition_merged = true;      // supervise merged RGB stream
    bool condition_background = true;  // supervise background RGB stream
    double aux_stream_weight = 1.0;    // L1 weight for merged/background
    double huber_delta = 1e-3;         // smoothing width of the training loss

    int head_dim() const { return hidden / heads; }
    int out_dim() const { return pixels_per_token * pixels_per_token * 4; }
};

/// All weights in one flat vector with a named slice index.
struct Parameters {
    std::vector<double> values;
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> slices;

    std::size_t size() const { return values.size(); }
    /// Name of the slice owning flat index i.
    const std::string& slice_name(std::size_t i) const;
};

/// Expected parameter count for a config.
std::size_t parameter_count(const DecoderConfig& cfg);

/// Truncated-normal init (std 0.02) with the final projection zeroed so the
/// step-0 output is the constant output bias.
Parameters init_parameters(const DecoderConfig& cfg, std::uint64_t seed);

/// Decoded streams: RGB rasters for merged/background (full canvas), RGBA
/// raster per foreground at its aligned crop size.
struct DecodedLayers {
    Raster merged_rgb;
    Raster background_rgb;
    std::vector<Raster> foreground_rgba;
    std::vector<PixelBox> foreground_boxes;  // canvas placement of each raster
};

/// Forward pass. Token n's output patch lands at its (layer, row, col) id;
/// merged/background tokens keep only the RGB channels of their patch.
DecodedLayers decoder_forward(const Parameters& params, const LatentSequence& seq,
                              const AnonymousRegionLayout& layout,
                              const DecoderConfig& cfg);

/// Supervision targets matching DecodedLayers shapes.
struct DecodeTarget {
    Raster merged_rgb;
    Raster background_rgb;
    std::vector<Raster> foreground_rgba;
};

/// Mean absolute error over supervised channels: foreground RGBA always,
/// merged/background RGB iff conditioned on, weighted by aux_stream_weight.
double l1_loss(const DecodedLayers& pred, const DecodeTarget& target,
               const DecoderConfig& cfg);

/// Smoothed variant used for training (quadratic below huber_delta).
double training_loss(const DecodedLayers& pred, const DecodeTarget& target,
                     const DecoderConfig& cfg);

struct Batch {
    LatentSequence seq;
    AnonymousRegionLayout layout;
    DecodeTarget target;
};

/// Analytic gradient of the smoothed training loss summed over the batch
/// (mean over items). Matches central finite differences of the same loss.
std::vector<double> grad(const Parameters& params, const std::vector<Batch>& batch,
                         const DecoderConfig& cfg);

/// Batch-mean training loss without gradients, for finite differencing.
double batch_training_loss(const Parameters& params, const std::vector<Batch>& batch,
                           const DecoderConfig& cfg);

/// Batch-mean true L1 loss.
double batch_l1_loss(const Parameters& params, const std::vector<Batch>& batch,
                     const DecoderConfig& cfg);

struct TrainRecord {
    int step = 0;
    double l1 = 0.0;
    std::int64_t wall_ms = 0;
};

/// Builds a training batch (sequence + targets) from a synthetic sample.
Batch make_batch(const MultiLayerImage& sample, const PipelineConfig& pipe,
                 const DecoderConfig& cfg);

/// Plain gradient descent with fixed lr; deterministic given seed. Aborts on
/// a non-finite loss, returning the trace up to the last good step.
std::vector<TrainRecord> train_overfit(const std::vector<MultiLayerImage>& samples,
                                       const PipelineConfig& pipe,
                                       const DecoderConfig& cfg, int steps, double lr,
                                       std::uint64_t seed, Parameters* out_params = nullptr);

/// Checkpoint: JSON slice index alongside a little-endian f64 payload.
void save_checkpoint(const std::string& path, const Parameters& params);
Parameters load_checkpoint(const std::string& path);

}  // namespace art
