// Independent reference implementations used to check the library. These
// deliberately avoid the library's evaluation paths: plain double loops,
// direct transcriptions of the defining formulas.
#pragma once

#include <cmath>
#include <vector>

#include "tricl/losses.hpp"
#include "tricl/rng.hpp"
#include "tricl/tensor.hpp"

namespace oracles {

using tricl::Rng;
using tricl::Shape;
using tricl::Tensor;

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor t(Shape{rows, cols});
    for (double& v : t.data()) v = rng.normal();
    return t;
}

inline Tensor random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor t = random_matrix(rng, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sq += t[r * cols + j] * t[r * cols + j];
        const double n = std::sqrt(sq);
        for (std::size_t j = 0; j < cols; ++j) t[r * cols + j] /= n;
    }
    return t;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double max_rel_err(const Tensor& a, const Tensor& b, double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), floor}));
    return worst;
}

// squared triangle area via the explicit angle: (1/2 |u||v| sin theta)^2
inline double triangle_area_sq_by_angle(const std::vector<double>& a, const std::vector<double>& b,
                                        const std::vector<double>& c) {
    const std::size_t d = a.size();
    double uu = 0, vv = 0, uv = 0;
    for (std::size_t t = 0; t < d; ++t) {
        const double u = b[t] - a[t], v = c[t] - a[t];
        uu += u * u;
        vv += v * v;
        uv += u * v;
    }
    if (uu == 0.0 || vv == 0.0) return 0.0;
    double cosv = uv / std::sqrt(uu * vv);
    cosv = std::min(1.0, std::max(-1.0, cosv));
    const double theta = std::acos(cosv);
    const double area = 0.5 * std::sqrt(uu) * std::sqrt(vv) * std::sin(theta);
    return area * area;
}

inline std::vector<double> row_of(const Tensor& Z, std::size_t r) {
    const std::size_t d = Z.dim(1);
    std::vector<double> out(d);
    for (std::size_t j = 0; j < d; ++j) out[j] = Z[r * d + j];
    return out;
}

// direct alpha-weighted evaluation of the batched triangular metric
inline double eq3_direct(const Tensor& Z1, const Tensor& Z2, const Tensor& Z3) {
    const std::size_t n = Z1.dim(0);
    const std::size_t B = n / 2;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                const double w = tricl::geom::alpha(i / 2 + 1, j / 2 + 1, k / 2 + 1, B);
                total += w * triangle_area_sq_by_angle(row_of(Z1, i), row_of(Z2, j), row_of(Z3, k));
            }
    return total;
}

inline double dot_rows(const Tensor& A, std::size_t i, const Tensor& B, std::size_t j) {
    const std::size_t d = A.dim(1);
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) s += A[i * d + t] * B[j * d + t];
    return s;
}

// NT-Xent within a modality, straight from the definition
inline double nt_xent_intra_direct(const Tensor& Z, double tau) {
    const std::size_t n = Z.dim(0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i % 2 == 0 ? i + 1 : i - 1;
        double denom = 0.0;
        for (std::size_t m = 0; m < n; ++m)
            if (m != i) denom += std::exp(dot_rows(Z, i, Z, m) / tau);
        loss += -std::log(std::exp(dot_rows(Z, i, Z, j) / tau) / denom);
    }
    return loss / static_cast<double>(n);
}

// pairwise intermodal NT-Xent: positive is the same row index in the other
// modality; the denominator keeps the k != i exclusion
inline double nt_xent_inter_direct(const tricl::losses::TriBatch& b, double tau) {
    const std::size_t n = b.z[0].dim(0);
    double loss = 0.0;
    int terms = 0;
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t q = p + 1; q < 3; ++q)
            for (int dir = 0; dir < 2; ++dir) {
                const Tensor& A = dir == 0 ? b.z[p] : b.z[q];
                const Tensor& Bm = dir == 0 ? b.z[q] : b.z[p];
                double part = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double denom = 0.0;
                    for (std::size_t k = 0; k < n; ++k)
                        if (k != i) denom += std::exp(dot_rows(A, i, Bm, k) / tau);
                    part += -std::log(std::exp(dot_rows(A, i, Bm, i) / tau) / denom);
                }
                loss += part / static_cast<double>(n);
                ++terms;
            }
    return loss / terms;
}

inline double euclid(const Tensor& A, std::size_t i, const Tensor& B, std::size_t j) {
    const std::size_t d = A.dim(1);
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
        const double diff = A[i * d + t] - B[j * d + t];
        s += diff * diff;
    }
    return std::sqrt(s);
}

inline double triplet_margin_direct(const tricl::losses::TriBatch& b, double margin) {
    const std::size_t n = b.z[0].dim(0);
    const std::size_t B = n / 2;
    double total = 0.0;
    for (std::size_t aux = 1; aux <= 2; ++aux) {
        double part = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t neg = 2 * ((i / 2 + 1) % B) + (i % 2);
            part += std::max(0.0, euclid(b.z[0], i, b.z[aux], i) - euclid(b.z[0], i, b.z[aux], neg) + margin);
        }
        total += part / static_cast<double>(n);
    }
    return total / 2.0;
}

// brute-force negative-triplet mean of average pairwise cosine
inline double inter_uniformity_brute(const tricl::losses::TriBatch& b) {
    const std::size_t n = b.z[0].dim(0);
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                if (i / 2 == j / 2 && j / 2 == k / 2) continue;
                s += (dot_rows(b.z[0], i, b.z[1], j) + dot_rows(b.z[0], i, b.z[2], k) +
                      dot_rows(b.z[1], j, b.z[2], k)) /
                     3.0;
                ++count;
            }
    return s / static_cast<double>(count);
}

// random orthogonal matrix via Gram-Schmidt on a Gaussian matrix
inline Tensor random_rotation(Rng& rng, std::size_t d) {
    Tensor Q(Shape{d, d});
    for (std::size_t r = 0; r < d; ++r) {
        std::vector<double> v(d);
        for (double& x : v) x = rng.normal();
        for (std::size_t p = 0; p < r; ++p) {
            double proj = 0.0;
            for (std::size_t j = 0; j < d; ++j) proj += v[j] * Q[p * d + j];
            for (std::size_t j = 0; j < d; ++j) v[j] -= proj * Q[p * d + j];
        }
        double nrm = 0.0;
        for (double x : v) nrm += x * x;
        nrm = std::sqrt(nrm);
        for (std::size_t j = 0; j < d; ++j) Q[r * d + j] = v[j] / nrm;
    }
    return Q;
}

// rows of Z right-multiplied by R (no autodiff involvement)
inline Tensor rotate_rows(const Tensor& Z, const Tensor& R) {
    const std::size_t n = Z.dim(0), d = Z.dim(1);
    Tensor out(Shape{n, d});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) s += Z[r * d + t] * R[t * d + j];
            out[r * d + j] = s;
        }
    return out;
}

inline Tensor translate_rows(const Tensor& Z, const std::vector<double>& shift) {
    Tensor out = Z;
    const std::size_t n = Z.dim(0), d = Z.dim(1);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] += shift[j];
    return out;
}

} // namespace oracles
