#include "art/rope.hpp"

#include <cmath>

#include "art/errors.hpp"

namespace art {

RopeTables rope_1d(int dim, std::span<const std::int64_t> positions, double theta) {
    if (dim < 0 || dim % 2 != 0) {
        throw ValidationError("rope_1d: dim must be even");
    }
    RopeTables t;
    t.n = positions.size();
    t.dim = static_cast<std::size_t>(dim);
    t.cos.resize(t.n * t.dim);
    t.sin.resize(t.n * t.dim);

    const int half = dim / 2;
    std::vector<double> freqs(half);
    for (int j = 0; j < half; ++j) {
        freqs[j] = std::pow(theta, -2.0 * j / dim);
    }
    for (std::size_t i = 0; i < t.n; ++i) {
        const double p = static_cast<double>(positions[i]);
        for (int j = 0; j < half; ++j) {
            const double angle = p * freqs[j];
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            // duplicate-interleave: each frequency fills two adjacent channels
            t.cos[i * t.dim + 2 * j] = c;
            t.cos[i * t.dim + 2 * j + 1] = c;
            t.sin[i * t.dim + 2 * j] = s;
            t.sin[i * t.dim + 2 * j + 1] = s;
        }
    }
    return t;
}

RopeTables rope_3d(std::span<const TokenId> ids, const AxesDim& axes, double theta) {
    if (axes.layer < 0 || axes.y < 0 || axes.x < 0 ||
        axes.layer % 2 != 0 || axes.y % 2 != 0 || axes.x % 2 != 0) {
        throw ValidationError("rope_3d: axes_dim entries must be even and non-negative");
    }
    const std::size_t n = ids.size();
    std::vector<std::int64_t> col(n);
    const int dims[3] = {axes.layer, axes.y, axes.x};

    RopeTables t;
    t.n = n;
    t.dim = static_cast<std::size_t>(axes.total());
    t.cos.resize(n * t.dim);
    t.sin.resize(n * t.dim);

    std::size_t offset = 0;
    for (int axis = 0; axis < 3; ++axis) {
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = axis == 0 ? ids[i].layer : axis == 1 ? ids[i].row : ids[i].col;
        }
        const RopeTables part = rope_1d(dims[axis], col, theta);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < part.dim; ++j) {
                t.cos[i * t.dim + offset + j] = part.cos[i * part.dim + j];
                t.sin[i * t.dim + offset + j] = part.sin[i * part.dim + j];
            }
        }
        offset += part.dim;
    }
    return t;
}

void apply_rotary(std::span<double> x, const RopeTables& freqs) {
    if (x.size() != freqs.n * freqs.dim) {
        throw ValidationError("apply_rotary: shape mismatch");
    }
    for (std::size_t i = 0; i < freqs.n; ++i) {
        double* row = x.data() + i * freqs.dim;
        const double* c = freqs.cos_row(i);
        const double* s = freqs.sin_row(i);
        for (std::size_t j = 0; j + 1 < freqs.dim; j += 2) {
            const double a = row[j];
            const double b = row[j + 1];
            row[j] = a * c[j] - b * s[j];
            row[j + 1] = b * c[j + 1] + a * s[j + 1];
        }
    }
}

double attention_score(std::span<const double> q, std::span<const double> k,
                       const TokenId& pq, const TokenId& pk,
                       const AxesDim& axes, double theta) {
    if (q.size() != k.size() || q.size() != static_cast<std::size_t>(axes.total())) {
        throw ValidationError("attention_score: dimension mismatch");
    }
    const TokenId ids[2] = {pq, pk};
    const RopeTables t = rope_3d(ids, axes, theta);

    std::vector<double> qr(q.begin(), q.end());
    std::vector<double> kr(k.begin(), k.end());
    // Rotate q with row 0 and k with row 1 of the two-token tables.
    RopeTables tq{1, t.dim, {t.cos.begin(), t.cos.begin() + t.dim},
                  {t.sin.begin(), t.sin.begin() + t.dim}};
    RopeTables tk{1, t.dim, {t.cos.begin() + t.dim, t.cos.end()},
                  {t.sin.begin() + t.dim, t.sin.end()}};
    apply_rotary(qr, tq);
    apply_rotary(kr, tk);

    double dot = 0.0;
    for (std::size_t j = 0; j < qr.size(); ++j) dot += qr[j] * kr[j];
    return dot;
}

}  // namespace art
