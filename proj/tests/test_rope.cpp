#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "art/errors.hpp"
#include "art/rng.hpp"
#include "art/rope.hpp"

using namespace art;

namespace {

// Relative-position oracle in complex arithmetic: sums over all axes and
// frequency channels Re[q_c conj(k_c) e^{i (p_q - p_k) f_j}], with adjacent
// channel pairs treated as one complex number.
double complex_score_oracle(const std::vector<double>& q, const std::vector<double>& k,
                            const TokenId& pq, const TokenId& pk, const AxesDim& axes,
                            double theta) {
    double total = 0.0;
    std::size_t offset = 0;
    const int dims[3] = {axes.layer, axes.y, axes.x};
    const std::int64_t dq[3] = {pq.layer, pq.row, pq.col};
    const std::int64_t dk[3] = {pk.layer, pk.row, pk.col};
    for (int axis = 0; axis < 3; ++axis) {
        const int dim = dims[axis];
        for (int j = 0; j < dim / 2; ++j) {
            const double freq = std::pow(theta, -2.0 * j / dim);
            const std::complex<double> qc(q[offset + 2 * j], q[offset + 2 * j + 1]);
            const std::complex<double> kc(k[offset + 2 * j], k[offset + 2 * j + 1]);
            const double rel = static_cast<double>(dq[axis] - dk[axis]) * freq;
            total += std::real(qc * std::conj(kc) *
                               std::exp(std::complex<double>(0.0, rel)));
        }
        offset += dim;
    }
    return total;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

TokenId random_id(Rng& rng) {
    return TokenId{rng.uniform_int(0, 20), rng.uniform_int(0, 63), rng.uniform_int(0, 63)};
}

}  // namespace

TEST_CASE("rope_1d at position zero is the identity rotation") {
    const std::int64_t pos[] = {0};
    const RopeTables t = rope_1d(8, pos);
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(t.cos[j] == 1.0);
        CHECK(t.sin[j] == 0.0);
    }
}

TEST_CASE("rope_1d single-frequency hand computation") {
    const std::int64_t pos[] = {1};
    const RopeTables t = rope_1d(2, pos);
    CHECK(t.cos[0] == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
    CHECK(t.cos[1] == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
    CHECK(t.sin[0] == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
    CHECK(t.sin[1] == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
}

TEST_CASE("rope_1d dim-4 frequency ladder") {
    const std::int64_t pos[] = {2};
    const RopeTables t = rope_1d(4, pos);
    const double a0 = 2.0;
    const double a1 = 2.0 * std::pow(10000.0, -0.5);
    CHECK(t.cos[0] == doctest::Approx(std::cos(a0)));
    CHECK(t.cos[1] == doctest::Approx(std::cos(a0)));
    CHECK(t.cos[2] == doctest::Approx(std::cos(a1)));
    CHECK(t.cos[3] == doctest::Approx(std::cos(a1)));
    CHECK(t.sin[2] == doctest::Approx(std::sin(a1)));
}

TEST_CASE("rope_1d rejects odd dims") {
    const std::int64_t pos[] = {0};
    CHECK_THROWS_AS(rope_1d(3, pos), ValidationError);
}

TEST_CASE("rope_3d zero ids give identity tables") {
    const TokenId ids[] = {TokenId{0, 0, 0}, TokenId{0, 0, 0}};
    const RopeTables t = rope_3d(ids, AxesDim{4, 6, 6});
    CHECK(t.dim == 16);
    for (double v : t.cos) CHECK(v == 1.0);
    for (double v : t.sin) CHECK(v == 0.0);
}

TEST_CASE("rope_3d paper-fidelity preset has 128 channels") {
    const TokenId ids[] = {TokenId{1, 2, 3}};
    const RopeTables t = rope_3d(ids, AxesDim{16, 56, 56});
    CHECK(t.dim == 128);
}

TEST_CASE("rope_3d cos^2 + sin^2 = 1 elementwise") {
    Rng rng(73);
    std::vector<TokenId> ids;
    for (int i = 0; i < 32; ++i) ids.push_back(random_id(rng));
    const RopeTables t = rope_3d(ids, AxesDim{4, 6, 6});
    for (std::size_t i = 0; i < t.cos.size(); ++i) {
        CHECK(std::abs(t.cos[i] * t.cos[i] + t.sin[i] * t.sin[i] - 1.0) < 1e-12);
    }
}

TEST_CASE("rope_3d axis permutation permutes channel blocks") {
    const TokenId id{5, 9, 13};
    const RopeTables t1 = rope_3d({&id, 1}, AxesDim{4, 6, 8});
    // swap the y and x axes together with their dims
    const TokenId swapped{5, 13, 9};
    const RopeTables t2 = rope_3d({&swapped, 1}, AxesDim{4, 8, 6});
    // layer block unchanged
    for (int j = 0; j < 4; ++j) CHECK(t1.cos[j] == t2.cos[j]);
    // y block of t1 appears as x block of t2
    for (int j = 0; j < 6; ++j) {
        CHECK(t1.cos[4 + j] == t2.cos[4 + 8 + j]);
        CHECK(t1.sin[4 + j] == t2.sin[4 + 8 + j]);
    }
    for (int j = 0; j < 8; ++j) {
        CHECK(t1.cos[4 + 6 + j] == t2.cos[4 + j]);
    }
}

TEST_CASE("apply_rotary identity at zero angles and unit rotation at pi/2") {
    const TokenId zero{0, 0, 0};
    RopeTables t = rope_3d({&zero, 1}, AxesDim{2, 0, 0});
    std::vector<double> x = {1.0, 0.5};
    apply_rotary(x, t);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == 0.5);

    // Force a pi/2 angle directly.
    t.cos = {0.0, 0.0};
    t.sin = {1.0, 1.0};
    x = {1.0, 0.0};
    apply_rotary(x, t);
    CHECK(std::abs(x[0] - 0.0) < 1e-12);
    CHECK(std::abs(x[1] - 1.0) < 1e-12);
}

TEST_CASE("apply_rotary preserves the Euclidean norm") {
    Rng rng(79);
    const AxesDim axes{4, 6, 6};
    for (int trial = 0; trial < 100; ++trial) {
        const TokenId id = random_id(rng);
        const RopeTables t = rope_3d({&id, 1}, axes);
        std::vector<double> x = random_vec(rng, 16);
        double before = 0.0;
        for (double v : x) before += v * v;
        apply_rotary(x, t);
        double after = 0.0;
        for (double v : x) after += v * v;
        CHECK(std::abs(std::sqrt(before) - std::sqrt(after)) < 1e-12);
    }
}

TEST_CASE("attention_score at equal positions is the plain dot product") {
    Rng rng(83);
    const AxesDim axes{4, 6, 6};
    const std::vector<double> q = random_vec(rng, 16);
    const std::vector<double> k = random_vec(rng, 16);
    const TokenId p{3, 7, 9};
    double dot = 0.0;
    for (int j = 0; j < 16; ++j) dot += q[j] * k[j];
    CHECK(attention_score(q, k, p, p, axes) == doctest::Approx(dot).epsilon(1e-12));
}

TEST_CASE("attention_score equals the complex-exponential oracle") {
    Rng rng(89);
    const AxesDim axes{4, 6, 6};
    for (int trial = 0; trial < 1000; ++trial) {
        const std::vector<double> q = random_vec(rng, 16);
        const std::vector<double> k = random_vec(rng, 16);
        const TokenId pq = random_id(rng);
        const TokenId pk = random_id(rng);
        const double fast = attention_score(q, k, pq, pk, axes);
        const double oracle = complex_score_oracle(q, k, pq, pk, axes, 10000.0);
        CHECK(std::abs(fast - oracle) <= 1e-9);
    }
}

TEST_CASE("attention_score is invariant to global id shifts") {
    Rng rng(97);
    const AxesDim axes{4, 6, 6};
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<double> q = random_vec(rng, 16);
        const std::vector<double> k = random_vec(rng, 16);
        const TokenId pq = random_id(rng);
        const TokenId pk = random_id(rng);
        const TokenId shift{5, 3, 2};
        const TokenId pq2{pq.layer + shift.layer, pq.row + shift.row, pq.col + shift.col};
        const TokenId pk2{pk.layer + shift.layer, pk.row + shift.row, pk.col + shift.col};
        CHECK(std::abs(attention_score(q, k, pq, pk, axes) -
                       attention_score(q, k, pq2, pk2, axes)) <= 1e-9);
    }
}
