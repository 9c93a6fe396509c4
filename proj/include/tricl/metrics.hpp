#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "tricl/losses.hpp"
#include "tricl/rng.hpp"
#include "tricl/tensor.hpp"

namespace tricl::metrics {

// One evaluation-batch row of embedding-space diagnostics: alignment is the
// average cosine similarity over positive pairs/triplets, uniformity the
// average over cross-sample ones, combined = align - |uniform|.
struct SpaceMetrics {
    std::array<double, 3> intra_align{};
    std::array<double, 3> intra_uniform{};
    std::array<double, 3> intra_combined{};
    double inter_align = 0.0;
    double inter_uniform = 0.0;
    double inter_combined = 0.0;
    long batch_id = 0;
    long epoch = 0;
};

inline double combined(double align, double uniform) { return align - std::abs(uniform); }

namespace detail {

inline void check_unit_rows(const Tensor& Z, const char* op) {
    TRICL_CHECK(Z.rank() == 2, op << ": expected [2B x d] matrix, got " << shape_str(Z.shape()));
    const std::size_t n = Z.dim(0), d = Z.dim(1);
    for (std::size_t r = 0; r < n; ++r) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sq += Z[r * d + j] * Z[r * d + j];
        TRICL_CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-6,
                    op << ": row " << r << " is not unit-norm (|row| = " << std::sqrt(sq) << ")");
    }
}

inline double row_dot(const Tensor& Z1, std::size_t i, const Tensor& Z2, std::size_t j) {
    const std::size_t d = Z1.dim(1);
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) s += Z1[i * d + t] * Z2[j * d + t];
    return s;
}

} // namespace detail

// mean cosine over the B positive (same-sample) augmentation pairs
inline double intra_alignment(const Tensor& Z) {
    detail::check_unit_rows(Z, "intra_alignment");
    TRICL_CHECK(Z.dim(0) % 2 == 0 && Z.dim(0) >= 2, "intra_alignment: expected 2B rows");
    const std::size_t B = Z.dim(0) / 2;
    double s = 0.0;
    for (std::size_t k = 0; k < B; ++k) s += detail::row_dot(Z, 2 * k, Z, 2 * k + 1);
    return s / static_cast<double>(B);
}

// mean cosine over all cross-sample row pairs: the deterministic exhaustive
// version of "randomly chosen pairs"
inline double intra_uniformity(const Tensor& Z) {
    detail::check_unit_rows(Z, "intra_uniformity");
    const std::size_t n = Z.dim(0);
    TRICL_CHECK(n % 2 == 0 && n >= 4, "intra_uniformity: need B >= 2, got " << n << " rows");
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (i / 2 == j / 2) continue;
            s += detail::row_dot(Z, i, Z, j);
            ++count;
        }
    return s / static_cast<double>(count);
}

// sampled variant for very large evaluation batches
inline double intra_uniformity_sampled(const Tensor& Z, std::size_t pair_count, std::uint64_t seed) {
    detail::check_unit_rows(Z, "intra_uniformity_sampled");
    const std::size_t n = Z.dim(0);
    TRICL_CHECK(n % 2 == 0 && n >= 4, "intra_uniformity_sampled: need B >= 2");
    TRICL_CHECK(pair_count > 0, "intra_uniformity_sampled: pair_count must be positive");
    Rng rng(seed);
    double s = 0.0;
    for (std::size_t t = 0; t < pair_count; ++t) {
        std::size_t i = rng.index(n), j = rng.index(n);
        while (j / 2 == i / 2) j = rng.index(n);
        s += detail::row_dot(Z, i, Z, j);
    }
    return s / static_cast<double>(pair_count);
}

// mean over the 8B positive triplets of the average pairwise cosine
inline double inter_alignment(const losses::TriBatch& batch) {
    batch.validate();
    for (const Tensor& Z : batch.z) detail::check_unit_rows(Z, "inter_alignment");
    const std::size_t B = batch.batch();
    double s = 0.0;
    for (std::size_t smp = 0; smp < B; ++smp)
        for (std::size_t p = 0; p < 2; ++p)
            for (std::size_t q = 0; q < 2; ++q)
                for (std::size_t r = 0; r < 2; ++r) {
                    const std::size_t i = 2 * smp + p, j = 2 * smp + q, k = 2 * smp + r;
                    s += (detail::row_dot(batch.z[0], i, batch.z[1], j) +
                          detail::row_dot(batch.z[0], i, batch.z[2], k) +
                          detail::row_dot(batch.z[1], j, batch.z[2], k)) /
                         3.0;
                }
    return s / static_cast<double>(8 * B);
}

// mean over the 8(B^3-B) negative triplets of the average pairwise cosine,
// computed exactly from factorized sums: summed over all (2B)^3 triplets
// each pairwise term collapses onto products of per-modality row sums, and
// the positive part is an O(B d) correction.
inline double inter_uniformity(const losses::TriBatch& batch) {
    batch.validate();
    for (const Tensor& Z : batch.z) detail::check_unit_rows(Z, "inter_uniformity");
    const std::size_t B = batch.batch();
    TRICL_CHECK(B >= 2, "inter_uniformity: need B >= 2, got B=" << B);
    const std::size_t n = 2 * B, d = batch.dim();

    std::array<std::vector<double>, 3> colsum;
    for (std::size_t m = 0; m < 3; ++m) {
        colsum[m].assign(d, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t t = 0; t < d; ++t) colsum[m][t] += batch.z[m][r * d + t];
    }
    auto vdot = [d](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) s += a[t] * b[t];
        return s;
    };
    const double all_pairsum = static_cast<double>(n) *
                               (vdot(colsum[0], colsum[1]) + vdot(colsum[0], colsum[2]) +
                                vdot(colsum[1], colsum[2]));

    // positive triplets: each pairwise term appears twice per sample (the
    // free third index ranges over 2 augmentations)
    double pos_pairsum = 0.0;
    for (std::size_t smp = 0; smp < B; ++smp) {
        std::array<std::vector<double>, 3> pair_sum;
        for (std::size_t m = 0; m < 3; ++m) {
            pair_sum[m].assign(d, 0.0);
            for (std::size_t t = 0; t < d; ++t)
                pair_sum[m][t] = batch.z[m][(2 * smp) * d + t] + batch.z[m][(2 * smp + 1) * d + t];
        }
        pos_pairsum += 2.0 * (vdot(pair_sum[0], pair_sum[1]) + vdot(pair_sum[0], pair_sum[2]) +
                              vdot(pair_sum[1], pair_sum[2]));
    }

    const auto counts = geom::triplet_counts(B);
    return (all_pairsum - pos_pairsum) / 3.0 / static_cast<double>(counts.negative);
}

inline SpaceMetrics space_metrics(const losses::TriBatch& batch, long epoch = 0, long batch_id = 0) {
    SpaceMetrics m;
    m.epoch = epoch;
    m.batch_id = batch_id;
    for (std::size_t i = 0; i < 3; ++i) {
        m.intra_align[i] = intra_alignment(batch.z[i]);
        m.intra_uniform[i] = intra_uniformity(batch.z[i]);
        m.intra_combined[i] = combined(m.intra_align[i], m.intra_uniform[i]);
    }
    m.inter_align = inter_alignment(batch);
    m.inter_uniform = inter_uniformity(batch);
    m.inter_combined = combined(m.inter_align, m.inter_uniform);
    return m;
}

} // namespace tricl::metrics
