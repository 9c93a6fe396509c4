#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tricl/encoders.hpp"
#include "tricl/losses.hpp"
#include "tricl/trainer.hpp"

namespace tricl::gradcheck {

constexpr double kFdStep = 1e-5;
constexpr double kTolerance = 1e-4;

// Probe scalars are kept small: central differencing carries a roundoff
// term of order eps*|f|/(2h), and |f| <= ~0.05 keeps it under the 1e-4
// threshold at the 1e-8 comparison floor. Scaling the probed functional
// scales both gradient routes identically, so the check itself is
// unchanged.
constexpr double kProbeScale = 0.01;

// element-wise relative error with denominator max(|a|,|b|,1e-8)
inline double max_rel_error(const Tensor& a, const Tensor& b) {
    TRICL_CHECK(a.shape() == b.shape(), "max_rel_error: shape mismatch " << shape_str(a.shape()) << " vs "
                                                                         << shape_str(b.shape()));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

struct CheckRow {
    std::string name;
    double max_err = 0.0;
    std::size_t instances = 0;

    bool pass() const { return max_err <= kTolerance; }
};

namespace detail {

inline Tensor random_rows(Rng& rng, std::size_t rows, std::size_t d, bool unit_norm) {
    Tensor t(Shape{rows, d});
    for (double& v : t.data()) v = rng.normal();
    if (unit_norm)
        for (std::size_t r = 0; r < rows; ++r) {
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) sq += t[r * d + j] * t[r * d + j];
            const double nrm = std::sqrt(sq);
            for (std::size_t j = 0; j < d; ++j) t[r * d + j] /= nrm;
        }
    return t;
}

// Compares the tape gradient of `loss_of(batch)` w.r.t. each modality
// against central finite differences.
inline void check_loss(CheckRow& row, Rng& rng, std::size_t B, std::size_t d,
                       const std::function<Tensor(const losses::TriBatch&)>& loss_of) {
    losses::TriBatch batch;
    for (std::size_t m = 0; m < 3; ++m) {
        batch.z[m] = random_rows(rng, 2 * B, d, /*unit_norm=*/true);
        batch.z[m].set_requires_grad(true);
    }
    Graph::active().reset();
    const Gradients grads = backward(mul_scalar(loss_of(batch), kProbeScale));
    for (std::size_t m = 0; m < 3; ++m) {
        const Tensor* an = grads.find(batch.z[m]);
        if (an == nullptr) continue; // loss does not involve this modality
        const Tensor fd = finite_diff_gradient(
            [&](const Tensor& probe) {
                losses::TriBatch b = batch;
                b.z[m] = probe;
                return kProbeScale * loss_of(b).item();
            },
            batch.z[m], kFdStep);
        row.max_err = std::max(row.max_err, max_rel_error(*an, fd));
    }
    ++row.instances;
}

// Compares tape gradients of a scalar function of the full parameter set
// against finite differences, parameter tensor by parameter tensor.
inline void check_params(CheckRow& row, enc::EncoderParams& params,
                         const std::function<Tensor(const enc::EncoderParams&)>& f) {
    Graph::active().reset();
    const Gradients grads = backward(f(params));
    for (auto& [name, tensor] : params.params.items()) {
        const Tensor* an = grads.find(tensor);
        if (an == nullptr) continue; // parameter not on this path
        const Tensor fd = finite_diff_gradient(
            [&](const Tensor& probe) {
                enc::EncoderParams q = params;
                q.params.at(name).data() = probe.data();
                return f(q).item();
            },
            tensor, kFdStep);
        row.max_err = std::max(row.max_err, max_rel_error(*an, fd));
    }
    ++row.instances;
}

} // namespace detail

// Finite-difference sweep over every loss variant and encoder path.
// `sizes` are (B, d) pairs for the loss checks.
inline std::vector<CheckRow> run_all(std::uint64_t seed,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
                                     std::size_t instances_per_size = 9) {
    Rng rng(seed);
    std::vector<CheckRow> rows;

    const auto loss_checks = std::vector<std::pair<std::string, std::function<Tensor(const losses::TriBatch&)>>>{
        {"nt_xent_intra", [](const losses::TriBatch& b) { return losses::nt_xent_intra(b.z[0], 0.1); }},
        {"nt_xent_inter_pairwise",
         [](const losses::TriBatch& b) { return losses::nt_xent_inter_pairwise(b, 0.1); }},
        {"triplet_margin_inter",
         [](const losses::TriBatch& b) { return losses::triplet_margin_inter(b, 1.0); }},
        {"triangular_area_loss", [](const losses::TriBatch& b) { return losses::triangular_area_loss(b); }},
        {"total_objective",
         [](const losses::TriBatch& b) {
             losses::LossConfig cfg; // all intra terms plus the triangular intermodal term
             return losses::total_objective(b, cfg).total;
         }},
    };
    for (const auto& [name, fn] : loss_checks) {
        CheckRow row{name};
        for (const auto& [B, d] : sizes)
            for (std::size_t t = 0; t < instances_per_size; ++t) detail::check_loss(row, rng, B, d, fn);
        rows.push_back(row);
    }

    // encoder paths, small dims: scalar probe through encode -> project
    enc::Dims dims;
    dims.hidden = 8;
    dims.joint = 6;
    dims.view_dims = {5, 5, 5};
    const std::size_t encoder_instances = 6;

    {
        CheckRow row{"encoder_graph"};
        for (std::size_t t = 0; t < encoder_instances; ++t) {
            enc::EncoderParams p = enc::init_params(rng.below(1u << 30), enc::Family::Molecule, dims);
            const modal::MoleculeSample mol = modal::gen_toy_molecule(rng.below(1u << 30), 4, 8);
            Tensor w(Shape{dims.joint});
            for (double& v : w.data()) v = kProbeScale * rng.normal();
            detail::check_params(row, p, [&](const enc::EncoderParams& q) {
                return dot(enc::project(enc::encode_graph(mol.graph, q), q, 0), w);
            });
        }
        rows.push_back(row);
    }
    {
        CheckRow row{"encoder_seq"};
        for (std::size_t t = 0; t < encoder_instances; ++t) {
            enc::EncoderParams p = enc::init_params(rng.below(1u << 30), enc::Family::Molecule, dims);
            const modal::MoleculeSample mol = modal::gen_toy_molecule(rng.below(1u << 30), 4, 8);
            Tensor w(Shape{dims.joint});
            for (double& v : w.data()) v = kProbeScale * rng.normal();
            detail::check_params(row, p, [&](const enc::EncoderParams& q) {
                return dot(enc::project(enc::encode_seq(mol.tokens, q), q, 1), w);
            });
        }
        rows.push_back(row);
    }
    {
        CheckRow row{"encoder_voxel"};
        for (std::size_t t = 0; t < encoder_instances; ++t) {
            enc::EncoderParams p = enc::init_params(rng.below(1u << 30), enc::Family::Molecule, dims);
            const modal::MoleculeSample mol = modal::gen_toy_molecule(rng.below(1u << 30), 4, 8);
            Tensor w(Shape{dims.joint});
            for (double& v : w.data()) v = kProbeScale * rng.normal();
            detail::check_params(row, p, [&](const enc::EncoderParams& q) {
                return dot(enc::project(enc::encode_voxel(mol.voxels, q), q, 2), w);
            });
        }
        rows.push_back(row);
    }
    {
        CheckRow row{"encoder_latent"};
        for (std::size_t t = 0; t < encoder_instances; ++t) {
            enc::EncoderParams p = enc::init_params(rng.below(1u << 30), enc::Family::Latent, dims);
            Tensor X = detail::random_rows(rng, 4, dims.view_dims[0], false);
            Tensor w(Shape{4 * dims.joint});
            for (double& v : w.data()) v = kProbeScale * rng.normal();
            detail::check_params(row, p, [&](const enc::EncoderParams& q) {
                const Tensor Z = enc::project(enc::encode_latent_rows(X, q, 0), q, 0);
                return dot(reshape(Z, Shape{Z.size()}), w);
            });
        }
        rows.push_back(row);
    }
    {
        // full pipeline: augment (frozen) -> encode -> project -> objective,
        // gradients w.r.t. every parameter tensor, B=2, joint dim 8
        CheckRow row{"pipeline_composite"};
        enc::Dims pdims;
        pdims.hidden = 8;
        pdims.joint = 8;
        for (std::size_t t = 0; t < 2; ++t) {
            enc::EncoderParams p = enc::init_params(rng.below(1u << 30), enc::Family::Molecule, pdims);
            train::TrainConfig cfg;
            cfg.batch_size = 2;
            Rng data_rng(rng.below(1u << 30)), aug_rng(rng.below(1u << 30));
            const auto views = train::detail::molecule_views(cfg, 2, data_rng, aug_rng);
            losses::LossConfig lcfg;
            detail::check_params(row, p, [&](const enc::EncoderParams& q) {
                return mul_scalar(
                    losses::total_objective(train::detail::encode_molecule_batch(views, q), lcfg).total,
                    kProbeScale);
            });
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace tricl::gradcheck
