#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "tricl/geometry.hpp"
#include "tricl/tensor.hpp"

namespace tricl::losses {

enum class InterVariant { None, NtXentPairwise, TripletMargin, TriangularArea };

inline const char* to_string(InterVariant v) {
    switch (v) {
    case InterVariant::None: return "none";
    case InterVariant::NtXentPairwise: return "nt_xent_pairwise";
    case InterVariant::TripletMargin: return "triplet_margin";
    case InterVariant::TriangularArea: return "triangular_area";
    }
    return "?";
}

struct LossConfig {
    double tau = 0.1;          // NT-Xent temperature
    double lambda_inter = 1.0; // weight of the intermodal term
    double lambda_main = 1.0;  // weight of the main-modality intramodal term
    double margin = 1.0;       // triplet-margin parameter
    InterVariant inter_variant = InterVariant::TriangularArea;
    std::array<bool, 3> intra_enabled{true, true, true}; // main, aux1, aux2

    void validate() const {
        TRICL_CHECK(tau > 0.0, "LossConfig: tau must be > 0, got " << tau);
        TRICL_CHECK(lambda_inter >= 0.0, "LossConfig: lambda_inter must be >= 0");
        TRICL_CHECK(lambda_main >= 0.0, "LossConfig: lambda_main must be >= 0");
        TRICL_CHECK(margin >= 0.0, "LossConfig: margin must be >= 0");
    }
};

// The 6xB joint embedding set: one [2B x d] matrix per encoder, rows 2k and
// 2k+1 (0-based) holding the two augmentations of sample k. Rows are
// unit-norm when produced by the projection pipeline.
struct TriBatch {
    std::array<Tensor, 3> z; // main, aux1, aux2

    std::size_t batch() const { return z[0].dim(0) / 2; }
    std::size_t dim() const { return z[0].dim(1); }

    void validate() const {
        for (const Tensor& m : z)
            TRICL_CHECK(m.rank() == 2, "TriBatch: embeddings must be [2B x d] matrices");
        TRICL_CHECK(z[0].shape() == z[1].shape() && z[0].shape() == z[2].shape(),
                    "TriBatch: modality shapes differ");
        TRICL_CHECK(z[0].dim(0) % 2 == 0 && z[0].dim(0) >= 2, "TriBatch: row count must be 2B");
    }
};

namespace detail {

// constant 0/1 masks; recorded as non-differentiable leaves
inline Tensor offdiag_mask(std::size_t n) {
    Tensor m(Shape{n, n}, 1.0);
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 0.0;
    return m;
}

inline Tensor augmentation_pair_mask(std::size_t n) {
    Tensor m(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) m[i * n + (i % 2 == 0 ? i + 1 : i - 1)] = 1.0;
    return m;
}

inline Tensor diag_mask(std::size_t n) {
    Tensor m(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 1.0;
    return m;
}

} // namespace detail

// NT-Xent within one modality (rows assumed unit-norm, so the dot product
// is the cosine similarity):
//   L = (1/2B) sum_k [ l(2k-1,2k) + l(2k,2k-1) ],
//   l(i,j) = -log exp(sim_ij/tau) / sum_{m != i} exp(sim_im/tau).
inline Tensor nt_xent_intra(const Tensor& Z, double tau) {
    TRICL_CHECK(tau > 0.0, "nt_xent_intra: tau must be > 0, got " << tau);
    TRICL_CHECK(Z.rank() == 2 && Z.dim(0) % 2 == 0, "nt_xent_intra: expected [2B x d] matrix");
    const std::size_t n = Z.dim(0);
    TRICL_CHECK(n >= 4, "nt_xent_intra: need 2B >= 4 so every anchor has a negative, got " << n);
    const Tensor S = matmul(Z, transpose(Z));
    const Tensor denom = sum(mul(exp(mul_scalar(S, 1.0 / tau)), detail::offdiag_mask(n)), 1);
    const Tensor pos = sum(mul(S, detail::augmentation_pair_mask(n)), 1);
    return mean(add(mul_scalar(pos, -1.0 / tau), log(denom)));
}

// NT-Xent across each modality pair, symmetrized over direction. For
// anchor row i of modality m the positive is row i of m'; candidates in
// the denominator are the rows k != i of m' (the intramodal k != i
// exclusion carried across modalities, so the value on fully collapsed
// input is log(2B-1)).
inline Tensor nt_xent_inter_pairwise(const TriBatch& batch, double tau) {
    TRICL_CHECK(tau > 0.0, "nt_xent_inter_pairwise: tau must be > 0, got " << tau);
    batch.validate();
    const std::size_t n = batch.z[0].dim(0);
    TRICL_CHECK(n >= 4, "nt_xent_inter_pairwise: need 2B >= 4, got " << n);
    const Tensor off = detail::offdiag_mask(n);
    const Tensor diag = detail::diag_mask(n);
    Tensor total = Tensor::scalar(0.0);
    int directions = 0;
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b)
            for (int dir = 0; dir < 2; ++dir) {
                const Tensor& Za = dir == 0 ? batch.z[a] : batch.z[b];
                const Tensor& Zb = dir == 0 ? batch.z[b] : batch.z[a];
                const Tensor S = matmul(Za, transpose(Zb));
                const Tensor denom = sum(mul(exp(mul_scalar(S, 1.0 / tau)), off), 1);
                const Tensor pos = sum(mul(S, diag), 1);
                total = add(total, mean(add(mul_scalar(pos, -1.0 / tau), log(denom))));
                ++directions;
            }
    return mul_scalar(total, 1.0 / directions);
}

// Triplet margin across modalities: every row of main anchors against its
// matching row in each auxiliary modality, with the in-batch negative taken
// cyclically from the next sample (same augmentation slot). Deterministic
// by construction.
inline Tensor triplet_margin_inter(const TriBatch& batch, double margin) {
    TRICL_CHECK(margin >= 0.0, "triplet_margin_inter: margin must be >= 0");
    batch.validate();
    const std::size_t n = batch.z[0].dim(0);
    const std::size_t B = n / 2;
    TRICL_CHECK(B >= 2, "triplet_margin_inter: need B >= 2 so a negative exists, got B=" << B);
    std::vector<std::size_t> neg_rows(n);
    for (std::size_t i = 0; i < n; ++i) neg_rows[i] = 2 * ((i / 2 + 1) % B) + (i % 2);

    Tensor total = Tensor::scalar(0.0);
    for (std::size_t aux = 1; aux <= 2; ++aux) {
        const Tensor& A = batch.z[0];
        const Tensor& P = batch.z[aux];
        const Tensor N = gather_rows(batch.z[aux], neg_rows);
        const Tensor dp = sub(A, P);
        const Tensor dn = sub(A, N);
        const Tensor dist_p = sqrt(sum(mul(dp, dp), 1));
        const Tensor dist_n = sqrt(sum(mul(dn, dn), 1));
        total = add(total, mean(relu(add_scalar(sub(dist_p, dist_n), margin))));
    }
    return mul_scalar(total, 0.5);
}

// Triangular area objective: mean squared triangle area over positive
// triplets minus the mean over negative triplets, i.e. the alpha-weighted
// batched sum evaluated through the factorized path.
inline Tensor triangular_area_loss(const TriBatch& batch) {
    batch.validate();
    const geom::AreaSums sums = geom::triplet_area_sums_fast(batch.z[0], batch.z[1], batch.z[2]);
    return sub(sums.pos_mean, sums.neg_mean);
}

struct ObjectiveResult {
    Tensor total;
    // weighted term values in accumulation order; they sum to total exactly
    std::vector<std::pair<std::string, double>> breakdown;

    double term(const std::string& name) const {
        for (const auto& [k, v] : breakdown)
            if (k == name) return v;
        return 0.0;
    }
};

// Weighted total objective
//   L = lambda_main L_intra_main + L_intra_aux1 + L_intra_aux2 + lambda_inter L_inter.
// Disabled terms (flag off, or weight exactly zero) are never built, so
// they contribute neither value nor gradient.
inline ObjectiveResult total_objective(const TriBatch& batch, const LossConfig& cfg) {
    cfg.validate();
    batch.validate();
    static const char* kIntraNames[3] = {"intra_main", "intra_aux1", "intra_aux2"};

    ObjectiveResult out;
    bool any = false;
    Tensor total;
    auto accumulate_term = [&](const std::string& name, Tensor term) {
        out.breakdown.emplace_back(name, term.item());
        total = any ? add(total, term) : std::move(term);
        any = true;
    };

    for (std::size_t m = 0; m < 3; ++m) {
        const double w = m == 0 ? cfg.lambda_main : 1.0;
        if (!cfg.intra_enabled[m] || w == 0.0) {
            out.breakdown.emplace_back(kIntraNames[m], 0.0);
            continue;
        }
        Tensor term = nt_xent_intra(batch.z[m], cfg.tau);
        if (w != 1.0) term = mul_scalar(term, w);
        accumulate_term(kIntraNames[m], std::move(term));
    }

    if (cfg.inter_variant == InterVariant::None || cfg.lambda_inter == 0.0) {
        out.breakdown.emplace_back("inter", 0.0);
    } else {
        Tensor term;
        switch (cfg.inter_variant) {
        case InterVariant::NtXentPairwise: term = nt_xent_inter_pairwise(batch, cfg.tau); break;
        case InterVariant::TripletMargin: term = triplet_margin_inter(batch, cfg.margin); break;
        case InterVariant::TriangularArea: term = triangular_area_loss(batch); break;
        case InterVariant::None: break;
        }
        if (cfg.lambda_inter != 1.0) term = mul_scalar(term, cfg.lambda_inter);
        accumulate_term("inter", std::move(term));
    }

    TRICL_CHECK(any, "total_objective: all loss terms are disabled");
    out.total = std::move(total);
    return out;
}

} // namespace tricl::losses
