#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tricl/tensor.hpp"

namespace tricl::geom {

// Squared triangle area from the 2x2 Gram determinant,
//   Area^2 = 1/4 (|u|^2 |v|^2 - (u.v)^2),  u = b - a, v = c - a.
// No square roots, differentiable everywhere including degenerate
// triangles. Tiny negatives from cancellation are snapped to zero.
inline Tensor triangle_area_sq(const Tensor& a, const Tensor& b, const Tensor& c) {
    TRICL_CHECK(a.rank() == 1 && b.rank() == 1 && c.rank() == 1 && a.size() == b.size() && a.size() == c.size(),
                "triangle_area_sq: vertices must be equal-length vectors, got "
                    << shape_str(a.shape()) << ", " << shape_str(b.shape()) << ", " << shape_str(c.shape()));
    TRICL_CHECK(a.size() >= 2, "triangle_area_sq: dimension must be >= 2");
    const Tensor u = sub(b, a);
    const Tensor v = sub(c, a);
    const Tensor uu = sum(mul(u, u));
    const Tensor vv = sum(mul(v, v));
    const Tensor uv = sum(mul(u, v));
    return clamp_tiny_neg(mul_scalar(sub(mul(uu, vv), mul(uv, uv)), 0.25));
}

// Triplet normalization weight: +1/(8B) on positive triplets (i==j==k),
// -1/(8(B^3-B)) otherwise. Sample indices are 1-based.
inline double alpha(std::size_t i, std::size_t j, std::size_t k, std::size_t B) {
    TRICL_CHECK(B >= 2, "alpha: batch size must be >= 2, got " << B);
    TRICL_CHECK(i >= 1 && i <= B && j >= 1 && j <= B && k >= 1 && k <= B,
                "alpha: sample indices must lie in [1, " << B << "]");
    const double b = static_cast<double>(B);
    if (i == j && j == k) return 1.0 / (8.0 * b);
    return -1.0 / (8.0 * (b * b * b - b));
}

struct TripletCounts {
    std::size_t positive;
    std::size_t negative;
};

inline TripletCounts triplet_counts(std::size_t B) {
    TRICL_CHECK(B >= 2, "triplet_counts: batch size must be >= 2, got " << B);
    return {8 * B, 8 * (B * B * B - B)};
}

// Per-modality summary statistics that make the factorized evaluation of
// the batched triplet sum possible.
struct ModalityMoments {
    std::size_t count = 0;  // 2B
    Tensor vec_sum;         // [d]
    Tensor gram_sum;        // [d x d]
    double sqnorm_sum = 0.0;

    void validate() const {
        const std::size_t d = vec_sum.size();
        TRICL_CHECK(gram_sum.rank() == 2 && gram_sum.dim(0) == d && gram_sum.dim(1) == d,
                    "ModalityMoments: gram_sum shape mismatch");
        double trace = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            trace += gram_sum.at(i, i);
            for (std::size_t j = i + 1; j < d; ++j)
                TRICL_CHECK(std::abs(gram_sum.at(i, j) - gram_sum.at(j, i)) <= 1e-12,
                            "ModalityMoments: gram_sum asymmetric at (" << i << "," << j << ")");
        }
        const double denom = std::max(std::abs(sqnorm_sum), 1e-30);
        TRICL_CHECK(std::abs(trace - sqnorm_sum) / denom <= 1e-9,
                    "ModalityMoments: trace " << trace << " != sqnorm_sum " << sqnorm_sum);
    }
};

inline ModalityMoments modality_moments(const Tensor& Z) {
    TRICL_CHECK(Z.rank() == 2, "modality_moments: expected [2B x d] matrix");
    const std::size_t n = Z.dim(0), d = Z.dim(1);
    ModalityMoments m;
    m.count = n;
    m.vec_sum = Tensor(Shape{d});
    m.gram_sum = Tensor(Shape{d, d});
    for (std::size_t r = 0; r < n; ++r) {
        const double* z = Z.data().data() + r * d;
        for (std::size_t i = 0; i < d; ++i) {
            m.vec_sum[i] += z[i];
            for (std::size_t j = 0; j < d; ++j) m.gram_sum[i * d + j] += z[i] * z[j];
        }
    }
    for (std::size_t i = 0; i < d; ++i) m.sqnorm_sum += m.gram_sum.at(i, i);
    return m;
}

struct AreaSums {
    Tensor pos_mean;
    Tensor neg_mean;
};

namespace detail {

inline void check_tri_batch(const Tensor& Z1, const Tensor& Z2, const Tensor& Z3) {
    TRICL_CHECK(Z1.rank() == 2 && Z2.rank() == 2 && Z3.rank() == 2, "triplet_area_sums: inputs must be matrices");
    TRICL_CHECK(Z1.shape() == Z2.shape() && Z1.shape() == Z3.shape(),
                "triplet_area_sums: modality shapes differ: " << shape_str(Z1.shape()) << ", "
                                                              << shape_str(Z2.shape()) << ", "
                                                              << shape_str(Z3.shape()));
    TRICL_CHECK(Z1.dim(0) % 2 == 0, "triplet_area_sums: row count must be 2B, got " << Z1.dim(0));
    TRICL_CHECK(Z1.dim(0) >= 4, "triplet_area_sums: batch size must be >= 2, got B=" << Z1.dim(0) / 2);
    TRICL_CHECK(Z1.dim(1) >= 2, "triplet_area_sums: dimension must be >= 2");
}

struct RawAreaSums {
    double pos_sum = 0.0;
    double neg_sum = 0.0;
    std::size_t pos_count = 0;
    std::size_t neg_count = 0;
};

// Full enumeration of all (2B)^3 triples. Reference implementation; the
// factorized path is checked against it value- and gradient-wise.
inline RawAreaSums naive_area_sums_raw(const std::vector<double>& z1, const std::vector<double>& z2,
                                       const std::vector<double>& z3, std::size_t n, std::size_t d) {
    RawAreaSums out;
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = z1.data() + i * d;
        for (std::size_t j = 0; j < n; ++j) {
            const double* b = z2.data() + j * d;
            for (std::size_t k = 0; k < n; ++k) {
                const double* c = z3.data() + k * d;
                double uu = 0.0, vv = 0.0, uv = 0.0;
                for (std::size_t t = 0; t < d; ++t) {
                    const double u = b[t] - a[t];
                    const double v = c[t] - a[t];
                    uu += u * u;
                    vv += v * v;
                    uv += u * v;
                }
                double area2 = 0.25 * (uu * vv - uv * uv);
                TRICL_CHECK(area2 >= -1e-15, "naive_area_sums: area^2 " << area2 << " below -1e-15");
                if (area2 < 0.0) area2 = 0.0;
                const bool positive = (i / 2 == j / 2) && (j / 2 == k / 2);
                if (positive) {
                    out.pos_sum += area2;
                    ++out.pos_count;
                } else {
                    out.neg_sum += area2;
                    ++out.neg_count;
                }
            }
        }
    }
    return out;
}

} // namespace detail

// Mean squared area over the 8B positive and 8(B^3-B) negative triplets by
// direct enumeration of all (2B)^3 triples. O(B^3 d): reference path only.
// Differentiable via an analytic per-triangle adjoint.
inline AreaSums triplet_area_sums_naive(const Tensor& Z1, const Tensor& Z2, const Tensor& Z3) {
    detail::check_tri_batch(Z1, Z2, Z3);
    const std::size_t n = Z1.dim(0), d = Z1.dim(1);
    const std::size_t B = n / 2;
    const auto raw = detail::naive_area_sums_raw(Z1.data(), Z2.data(), Z3.data(), n, d);
    const auto counts = triplet_counts(B);
    TRICL_CHECK(raw.pos_count == counts.positive && raw.neg_count == counts.negative,
                "triplet_area_sums_naive: internal count mismatch");

    Tensor means(Shape{2}, {raw.pos_sum / static_cast<double>(counts.positive),
                            raw.neg_sum / static_cast<double>(counts.negative)});
    if (Graph::grad_enabled() &&
        (tricl::detail::tracked(Z1) || tricl::detail::tracked(Z2) || tricl::detail::tracked(Z3))) {
        OpNode nd;
        nd.op = Op::Custom;
        nd.many = {tricl::detail::ensure_node(Z1), tricl::detail::ensure_node(Z2),
                   tricl::detail::ensure_node(Z3)};
        // The adjoint repeats the enumeration:
        //   dArea^2/du = 1/2 (|v|^2 u - (u.v) v), dv symmetric,
        //   da = -(du+dv), db = du, dc = dv, weighted by g_pos/N_pos or
        //   g_neg/N_neg. Clamped (degenerate) triangles contribute zero.
        nd.custom_backward = [z1 = Z1.data(), z2 = Z2.data(), z3 = Z3.data(), n, d,
                              counts](Graph& g, const OpNode& self) {
            const double wpos = self.grad[0] / static_cast<double>(counts.positive);
            const double wneg = self.grad[1] / static_cast<double>(counts.negative);
            std::vector<double> d1(n * d, 0.0), d2(n * d, 0.0), d3(n * d, 0.0);
            std::vector<double> du(d), dv(d);
            for (std::size_t i = 0; i < n; ++i) {
                const double* a = z1.data() + i * d;
                for (std::size_t j = 0; j < n; ++j) {
                    const double* b = z2.data() + j * d;
                    for (std::size_t k = 0; k < n; ++k) {
                        const double* c = z3.data() + k * d;
                        double uu = 0.0, vv = 0.0, uv = 0.0;
                        for (std::size_t t = 0; t < d; ++t) {
                            const double u = b[t] - a[t];
                            const double v = c[t] - a[t];
                            uu += u * u;
                            vv += v * v;
                            uv += u * v;
                        }
                        if (0.25 * (uu * vv - uv * uv) < 0.0) continue; // clamped: zero gradient
                        const bool positive = (i / 2 == j / 2) && (j / 2 == k / 2);
                        const double w = positive ? wpos : wneg;
                        if (w == 0.0) continue;
                        for (std::size_t t = 0; t < d; ++t) {
                            const double u = b[t] - a[t];
                            const double v = c[t] - a[t];
                            const double dut = w * 0.5 * (vv * u - uv * v);
                            const double dvt = w * 0.5 * (uu * v - uv * u);
                            d1[i * d + t] -= dut + dvt;
                            d2[j * d + t] += dut;
                            d3[k * d + t] += dvt;
                        }
                    }
                }
            }
            g.accumulate(self.many[0], d1.data(), d1.size());
            g.accumulate(self.many[1], d2.data(), d2.size());
            g.accumulate(self.many[2], d3.data(), d3.size());
        };
        tricl::detail::attach(means, std::move(nd));
    }
    return {select(means, 0), select(means, 1)};
}

// Same contract as the naive path, evaluated in O(B d^2) from per-modality
// moments:
//   sum_{ijk} Area^2(a_i, b_j, c_k) = 1/4 sum_i [ S^u_i S^v_i - tr(U_i V_i) ]
// with S^u_i = sum_j |b_j - a_i|^2 and U_i = sum_j (b_j-a_i)(b_j-a_i)^T
// (v/c analogous), every term expanded from {sum z, sum z z^T, sum |z|^2}.
// The positive sum is taken directly over the 8B positive triplets; the
// negative sum is total minus positive. Composed entirely from primitive
// ops, so the adjoint falls out of the tape.
inline AreaSums triplet_area_sums_fast(const Tensor& Z1, const Tensor& Z2, const Tensor& Z3) {
    detail::check_tri_batch(Z1, Z2, Z3);
    const std::size_t n = Z1.dim(0), d = Z1.dim(1);
    const std::size_t B = n / 2;
    const double nd = static_cast<double>(n);

    const Tensor s2 = sum(Z2, 0);
    const Tensor s3 = sum(Z3, 0);
    const Tensor G2 = matmul(transpose(Z2), Z2);
    const Tensor G3 = matmul(transpose(Z3), Z3);
    const Tensor q2 = sum(mul(Z2, Z2));
    const Tensor q3 = sum(mul(Z3, Z3));

    const Tensor nrm1 = sum(mul(Z1, Z1), 1);     // |a_i|^2
    const Tensor As2 = matmul(Z1, s2);           // a_i . s2
    const Tensor As3 = matmul(Z1, s3);
    const Tensor aG2a = sum(mul(matmul(Z1, G2), Z1), 1);
    const Tensor aG3a = sum(mul(matmul(Z1, G3), Z1), 1);
    const Tensor AG2s3 = matmul(Z1, matmul(G2, s3));
    const Tensor AG3s2 = matmul(Z1, matmul(G3, s2));
    const Tensor s23 = dot(s2, s3);
    const Tensor trG2G3 = sum(mul(G2, G3)); // both symmetric

    const Tensor Su = add(add(mul_scalar(As2, -2.0), mul_scalar(nrm1, nd)), q2);
    const Tensor Sv = add(add(mul_scalar(As3, -2.0), mul_scalar(nrm1, nd)), q3);
    const Tensor t_prod = sum(mul(Su, Sv));

    Tensor t_trace = mul_scalar(trG2G3, nd);
    t_trace = add(t_trace, mul_scalar(sum(AG2s3), -2.0));
    t_trace = add(t_trace, mul_scalar(sum(AG3s2), -2.0));
    t_trace = add(t_trace, mul_scalar(sum(aG2a), nd));
    t_trace = add(t_trace, mul_scalar(sum(aG3a), nd));
    t_trace = add(t_trace, mul_scalar(sum(mul(As2, As3)), 2.0));
    t_trace = add(t_trace, mul_scalar(mul(s23, sum(nrm1)), 2.0));
    t_trace = add(t_trace, mul_scalar(sum(mul(nrm1, As2)), -2.0 * nd));
    t_trace = add(t_trace, mul_scalar(sum(mul(nrm1, As3)), -2.0 * nd));
    t_trace = add(t_trace, mul_scalar(sum(mul(nrm1, nrm1)), nd * nd));

    const Tensor total = mul_scalar(sub(t_prod, t_trace), 0.25);

    // positive triplets: eight row-aligned (p,q,r) in {0,1}^3 combinations
    Tensor pos_total = Tensor::scalar(0.0);
    std::array<std::vector<std::size_t>, 2> rows;
    for (std::size_t p = 0; p < 2; ++p) {
        rows[p].resize(B);
        for (std::size_t s = 0; s < B; ++s) rows[p][s] = 2 * s + p;
    }
    for (std::size_t p = 0; p < 2; ++p) {
        const Tensor Ap = gather_rows(Z1, rows[p]);
        for (std::size_t q = 0; q < 2; ++q) {
            const Tensor U = sub(gather_rows(Z2, rows[q]), Ap);
            const Tensor uu = sum(mul(U, U), 1);
            for (std::size_t r = 0; r < 2; ++r) {
                const Tensor V = sub(gather_rows(Z3, rows[r]), Ap);
                const Tensor vv = sum(mul(V, V), 1);
                const Tensor uv = sum(mul(U, V), 1);
                const Tensor area2 = clamp_tiny_neg(mul_scalar(sub(mul(uu, vv), mul(uv, uv)), 0.25));
                pos_total = add(pos_total, sum(area2));
            }
        }
    }

    const auto counts = triplet_counts(B);
    AreaSums out;
    out.pos_mean = mul_scalar(pos_total, 1.0 / static_cast<double>(counts.positive));
    out.neg_mean = mul_scalar(sub(total, pos_total), 1.0 / static_cast<double>(counts.negative));
    TRICL_CHECK_NUM(std::isfinite(out.pos_mean.item()) && std::isfinite(out.neg_mean.item()),
                    "triplet_area_sums_fast: non-finite result");
    return out;
}

} // namespace tricl::geom
