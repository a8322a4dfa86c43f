#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "art/latent.hpp"

namespace art {

/// Channel budget split across the (layer, y, x) id axes. Every entry must
/// be even; the sum is the per-head dimension.
struct AxesDim {
    int layer = 16;
    int y = 56;
    int x = 56;

    int total() const { return layer + y + x; }
};

/// Per-token cosine/sine tables, N x dim. Axis blocks are contiguous in
/// channel order (layer, y, x); within an axis each frequency occupies two
/// adjacent channels (duplicate-interleave layout).
struct RopeTables {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> cos;
    std::vector<double> sin;

    const double* cos_row(std::size_t i) const { return cos.data() + i * dim; }
    const double* sin_row(std::size_t i) const { return sin.data() + i * dim; }
};

/// 1D rotary tables: frequency ladder f_j = theta^(-2j/dim), angle p * f_j,
/// each cos/sin value duplicated into two adjacent channels.
/// Throws ValidationError on odd dim.
RopeTables rope_1d(int dim, std::span<const std::int64_t> positions,
                   double theta = 10000.0);

/// 3D rotary tables: per-axis 1D tables from the matching id column,
/// concatenated along channels in order (layer, y, x).
RopeTables rope_3d(std::span<const TokenId> ids, const AxesDim& axes,
                   double theta = 10000.0);

/// Rotates each adjacent channel pair (a, b) of every row of x (N x dim,
/// in place): out = (a*cos - b*sin, b*cos + a*sin).
void apply_rotary(std::span<double> x, const RopeTables& freqs);

/// Rotary-rotated dot product between one query and one key at the given id
/// triples. Equals the per-axis complex-exponential relative-position form.
double attention_score(std::span<const double> q, std::span<const double> k,
                       const TokenId& pq, const TokenId& pk,
                       const AxesDim& axes, double theta = 10000.0);

}  // namespace art
