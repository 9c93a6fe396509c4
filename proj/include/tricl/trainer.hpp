#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tricl/augment.hpp"
#include "tricl/encoders.hpp"
#include "tricl/losses.hpp"
#include "tricl/metrics.hpp"
#include "tricl/modalities.hpp"

namespace tricl::train {

struct Seeds {
    std::uint64_t params = 1;
    std::uint64_t data = 2;
    std::uint64_t aug = 3;
};

struct DataConfig {
    std::size_t latent_k = 8;
    std::size_t latent_shared = 2; // latent coordinates visible to all modalities
    double noise_sigma = 0.1;
    std::size_t mol_nodes_min = 4;
    std::size_t mol_nodes_max = 10;
};

struct AugConfig {
    double nd_ratio = 0.2;
    double nm_ratio = 0.2;
    double sm_ratio = 0.05;
    // final preset: node drop for the graph, masking for sequence/voxel,
    // subgraph masking everywhere
    std::vector<modal::Strategy> graph{modal::Strategy::ND, modal::Strategy::SM};
    std::vector<modal::Strategy> seq{modal::Strategy::NM, modal::Strategy::SM};
    std::vector<modal::Strategy> voxel{modal::Strategy::NM, modal::Strategy::SM};

    double ratio_for(modal::Strategy s) const {
        switch (s) {
        case modal::Strategy::ND: return nd_ratio;
        case modal::Strategy::NM: return nm_ratio;
        case modal::Strategy::SM: return sm_ratio;
        }
        return 0.0;
    }
};

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    std::size_t steps_per_epoch = 20;
    double lr_init = 5e-4;
    double weight_decay = 1e-5;
    std::size_t warmup_epochs = 10;     // learning-rate ramp
    std::size_t inter_gate_epochs = 5;  // intermodal loss held out of the objective before this epoch
    losses::LossConfig loss;
    enc::Family family = enc::Family::Latent;
    enc::Dims dims;
    DataConfig data;
    AugConfig aug;
    Seeds seeds;
    std::size_t eval_every = 10;
    std::size_t eval_batch = 256;

    void validate() const {
        TRICL_CHECK(batch_size >= 2, "TrainConfig: batch_size must be >= 2");
        TRICL_CHECK(epochs >= 1, "TrainConfig: epochs must be >= 1");
        TRICL_CHECK(steps_per_epoch >= 1, "TrainConfig: steps_per_epoch must be >= 1");
        TRICL_CHECK(inter_gate_epochs <= epochs, "TrainConfig: inter_gate_epochs must be <= epochs");
        TRICL_CHECK(lr_init > 0.0, "TrainConfig: lr_init must be > 0");
        TRICL_CHECK(weight_decay >= 0.0, "TrainConfig: weight_decay must be >= 0");
        TRICL_CHECK(eval_every >= 1, "TrainConfig: eval_every must be >= 1");
        TRICL_CHECK(eval_batch >= 2, "TrainConfig: eval_batch must be >= 2");
        TRICL_CHECK(data.mol_nodes_min >= 2 && data.mol_nodes_min <= data.mol_nodes_max,
                    "TrainConfig: molecule node range invalid");
        TRICL_CHECK(data.latent_shared <= data.latent_k, "TrainConfig: latent_shared exceeds latent_k");
        loss.validate();
        const bool any_intra = loss.intra_enabled[0] || loss.intra_enabled[1] || loss.intra_enabled[2];
        TRICL_CHECK(any_intra || inter_gate_epochs == 0,
                    "TrainConfig: inter_gate_epochs > 0 with no intramodal term leaves the gated epochs "
                    "with an empty objective");
    }
};

// Linear ramp to lr_init over the warm-up epochs, then cosine annealing to
// zero across the remaining ones.
inline double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
    TRICL_CHECK(epoch < cfg.epochs, "lr_schedule: epoch " << epoch << " out of range");
    if (epoch < cfg.warmup_epochs)
        return cfg.lr_init * static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs);
    const double t = static_cast<double>(epoch - cfg.warmup_epochs) /
                     static_cast<double>(cfg.epochs - cfg.warmup_epochs);
    return cfg.lr_init * 0.5 * (1.0 + std::cos(M_PI * t));
}

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    // first/second moment buffers per parameter name
    std::unordered_map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;
};

// One Adam update with bias correction. Decoupled weight decay is applied
// as p <- p - lr*wd*p before the moment update. Parameters that received no
// gradient this step are left untouched entirely.
inline void adam_step(std::vector<std::pair<std::string, Tensor>>& params, const Gradients& grads,
                      AdamState& state, double lr, double weight_decay) {
    const long t = ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
    for (auto& [name, param] : params) {
        const Tensor* g = grads.find(param);
        if (g == nullptr) continue;
        TRICL_CHECK(g->shape() == param.shape(), "adam_step: gradient shape mismatch for " << name);
        for (double v : g->data())
            TRICL_CHECK_NUM(std::isfinite(v), "adam_step: non-finite gradient in " << name);
        auto& [m, v] = state.moments[name];
        if (m.empty()) {
            m.assign(param.size(), 0.0);
            v.assign(param.size(), 0.0);
        }
        for (std::size_t i = 0; i < param.size(); ++i) {
            if (weight_decay != 0.0) param[i] -= lr * weight_decay * param[i];
            const double gi = (*g)[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
        }
    }
}

struct StepRow {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double lr = 0.0;
    double total = 0.0;
    double intra_main = 0.0;
    double intra_aux1 = 0.0;
    double intra_aux2 = 0.0;
    double inter = 0.0;
};

struct MetricsLog {
    std::vector<StepRow> steps;
    std::vector<metrics::SpaceMetrics> evals;
};

struct TrainResult {
    enc::EncoderParams params;
    MetricsLog log;

    const metrics::SpaceMetrics& final_metrics() const {
        TRICL_CHECK(!log.evals.empty(), "TrainResult: no evaluation rows");
        return log.evals.back();
    }
};

namespace detail {

// Latent-family batch: each sample's shared latent comes from the data
// stream; the two augmentations per modality are independent view-noise
// draws from the augmentation stream.
struct LatentBatcher {
    const TrainConfig& cfg;
    modal::LatentFactorModel model;

    explicit LatentBatcher(const TrainConfig& c)
        : cfg(c), model(c.seeds.data, c.data.latent_k, c.dims.view_dims, c.data.latent_shared) {}

    std::array<Tensor, 3> views(std::size_t n_samples, Rng& data_rng, Rng& aug_rng) const {
        std::array<Tensor, 3> X;
        for (std::size_t m = 0; m < 3; ++m) X[m] = Tensor(Shape{2 * n_samples, cfg.dims.view_dims[m]});
        for (std::size_t s = 0; s < n_samples; ++s) {
            const std::vector<double> z = model.sample_latent(data_rng);
            for (std::size_t m = 0; m < 3; ++m) {
                const std::size_t vd = cfg.dims.view_dims[m];
                for (std::size_t a = 0; a < 2; ++a) {
                    const std::vector<double> view = model.view(m, z, cfg.data.noise_sigma, aug_rng);
                    std::copy(view.begin(), view.end(), X[m].data().begin() + (2 * s + a) * vd);
                }
            }
        }
        return X;
    }
};

struct MoleculeViews {
    std::vector<modal::MolGraph> graphs;   // 2B augmented graphs
    std::vector<modal::TokenSeq> tokens;   // 2B augmented sequences
    std::vector<modal::VoxelGrid> voxels;  // 2B augmented grids
};

inline MoleculeViews molecule_views(const TrainConfig& cfg, std::size_t n_samples, Rng& data_rng,
                                    Rng& aug_rng) {
    MoleculeViews out;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const modal::MoleculeSample mol =
            modal::gen_toy_molecule(data_rng.below(UINT64_MAX), cfg.data.mol_nodes_min, cfg.data.mol_nodes_max);
        for (std::size_t a = 0; a < 2; ++a) {
            modal::MolGraph gview = mol.graph;
            for (modal::Strategy st : cfg.aug.graph)
                gview = modal::augment_graph(gview, st, cfg.aug.ratio_for(st), aug_rng);
            out.graphs.push_back(std::move(gview));
            modal::TokenSeq tview = mol.tokens;
            for (modal::Strategy st : cfg.aug.seq)
                tview = modal::augment_tokens(tview, st, cfg.aug.ratio_for(st), aug_rng);
            out.tokens.push_back(std::move(tview));
            modal::VoxelGrid vview = mol.voxels;
            for (modal::Strategy st : cfg.aug.voxel)
                vview = modal::augment_voxels(vview, st, cfg.aug.ratio_for(st), aug_rng);
            out.voxels.push_back(std::move(vview));
        }
    }
    return out;
}

inline losses::TriBatch encode_latent_batch(const std::array<Tensor, 3>& X, const enc::EncoderParams& p) {
    losses::TriBatch tb;
    for (std::size_t m = 0; m < 3; ++m) tb.z[m] = enc::project(enc::encode_latent_rows(X[m], p, m), p, m);
    return tb;
}

inline losses::TriBatch encode_molecule_batch(const MoleculeViews& views, const enc::EncoderParams& p) {
    losses::TriBatch tb;
    std::vector<Tensor> rows;
    rows.reserve(views.graphs.size());
    for (const auto& g : views.graphs) rows.push_back(enc::encode_graph(g, p));
    tb.z[0] = enc::project(stack_rows(rows), p, 0);
    rows.clear();
    for (const auto& t : views.tokens) rows.push_back(enc::encode_seq(t, p));
    tb.z[1] = enc::project(stack_rows(rows), p, 1);
    rows.clear();
    for (const auto& v : views.voxels) rows.push_back(enc::encode_voxel(v, p));
    tb.z[2] = enc::project(stack_rows(rows), p, 2);
    return tb;
}

} // namespace detail

// The main pre-training loop: per minibatch, augment every sample twice per
// modality, encode, combine the weighted objective, and update all
// encoders. Before inter_gate_epochs the intermodal term is excluded from
// the objective (so it contributes no gradient). Metrics are computed on a
// fixed evaluation batch generated once from a dedicated stream.
inline TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    TrainResult res;
    res.params = enc::init_params(cfg.seeds.params, cfg.family, cfg.dims);

    Rng data_rng(cfg.seeds.data, 1);
    Rng aug_rng(cfg.seeds.aug, 0);
    Rng eval_data_rng(cfg.seeds.data, 101);
    Rng eval_aug_rng(cfg.seeds.data, 102);

    // evaluation batch fixed at generation and reused across epochs
    detail::LatentBatcher latent(cfg);
    std::array<Tensor, 3> eval_views;
    detail::MoleculeViews eval_mols;
    if (cfg.family == enc::Family::Latent)
        eval_views = latent.views(cfg.eval_batch, eval_data_rng, eval_aug_rng);
    else
        eval_mols = detail::molecule_views(cfg, cfg.eval_batch, eval_data_rng, eval_aug_rng);

    auto evaluate = [&](std::size_t epoch) {
        NoGradGuard ng;
        const losses::TriBatch tb = cfg.family == enc::Family::Latent
                                        ? detail::encode_latent_batch(eval_views, res.params)
                                        : detail::encode_molecule_batch(eval_mols, res.params);
        metrics::SpaceMetrics m = metrics::space_metrics(tb, static_cast<long>(epoch));
        res.log.evals.push_back(m);
    };

    AdamState adam;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        losses::LossConfig eff = cfg.loss;
        if (epoch < cfg.inter_gate_epochs) eff.inter_variant = losses::InterVariant::None;
        for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
            Graph::active().reset();
            losses::TriBatch tb;
            if (cfg.family == enc::Family::Latent) {
                tb = detail::encode_latent_batch(latent.views(cfg.batch_size, data_rng, aug_rng), res.params);
            } else {
                tb = detail::encode_molecule_batch(detail::molecule_views(cfg, cfg.batch_size, data_rng, aug_rng),
                                                   res.params);
            }
            losses::ObjectiveResult obj;
            try {
                obj = losses::total_objective(tb, eff);
            } catch (const NumericalError& e) {
                throw NumericalError("training aborted at epoch " + std::to_string(epoch) + " step " +
                                     std::to_string(step) + ": " + e.what());
            }
            const Gradients grads = backward(obj.total);
            adam_step(res.params.params.items(), grads, adam, lr, cfg.weight_decay);

            StepRow row;
            row.epoch = epoch;
            row.step = step;
            row.lr = lr;
            row.total = obj.total.item();
            row.intra_main = obj.term("intra_main");
            row.intra_aux1 = obj.term("intra_aux1");
            row.intra_aux2 = obj.term("intra_aux2");
            row.inter = obj.term("inter");
            res.log.steps.push_back(row);
        }
        if (epoch % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) evaluate(epoch);
    }
    return res;
}

// ---- presets ------------------------------------------------------------

enum class Preset { IntraOnly, InterNtXent, InterTriangular, JointNtXent, JointTriangular, Ablate3a };

inline const char* to_string(Preset p) {
    switch (p) {
    case Preset::IntraOnly: return "intra_only";
    case Preset::InterNtXent: return "inter_ntxent";
    case Preset::InterTriangular: return "inter_triangular";
    case Preset::JointNtXent: return "joint_ntxent";
    case Preset::JointTriangular: return "joint_triangular";
    case Preset::Ablate3a: return "ablate_3a";
    }
    return "?";
}

inline Preset preset_from_string(const std::string& name) {
    for (Preset p : {Preset::IntraOnly, Preset::InterNtXent, Preset::InterTriangular, Preset::JointNtXent,
                     Preset::JointTriangular, Preset::Ablate3a})
        if (name == to_string(p)) return p;
    throw Error("unknown preset: " + name);
}

inline TrainConfig preset_config(Preset p) {
    TrainConfig cfg; // desk-scale defaults: B=64, 100 epochs x 20 steps, latent data
    switch (p) {
    case Preset::IntraOnly:
        cfg.loss.inter_variant = losses::InterVariant::None;
        break;
    case Preset::InterNtXent:
        cfg.loss.intra_enabled = {false, false, false};
        cfg.loss.inter_variant = losses::InterVariant::NtXentPairwise;
        cfg.inter_gate_epochs = 0; // nothing else to train during a gate
        break;
    case Preset::InterTriangular:
        cfg.loss.intra_enabled = {false, false, false};
        cfg.loss.inter_variant = losses::InterVariant::TriangularArea;
        cfg.inter_gate_epochs = 0;
        break;
    case Preset::JointNtXent:
        cfg.loss.inter_variant = losses::InterVariant::NtXentPairwise;
        break;
    case Preset::JointTriangular:
        cfg.loss.inter_variant = losses::InterVariant::TriangularArea;
        break;
    case Preset::Ablate3a:
        throw Error("preset_config: ablate_3a is a grid; use run_preset");
    }
    return cfg;
}

struct LabeledRun {
    std::string label;
    TrainResult result;
};

inline std::vector<LabeledRun> run_preset(Preset p) {
    std::vector<LabeledRun> out;
    if (p != Preset::Ablate3a) {
        out.push_back({to_string(p), train(preset_config(p))});
        return out;
    }
    // objective-function ablation grid: intra loss x inter loss
    struct Combo {
        const char* label;
        bool intra;
        losses::InterVariant inter;
    };
    const Combo combos[] = {
        {"nt_xent/-", true, losses::InterVariant::None},
        {"-/nt_xent", false, losses::InterVariant::NtXentPairwise},
        {"-/triplet_margin", false, losses::InterVariant::TripletMargin},
        {"-/triangle_area", false, losses::InterVariant::TriangularArea},
        {"nt_xent/nt_xent", true, losses::InterVariant::NtXentPairwise},
        {"nt_xent/triplet_margin", true, losses::InterVariant::TripletMargin},
        {"nt_xent/triangle_area", true, losses::InterVariant::TriangularArea},
    };
    for (const Combo& c : combos) {
        TrainConfig cfg;
        cfg.loss.intra_enabled = {c.intra, c.intra, c.intra};
        cfg.loss.inter_variant = c.inter;
        out.push_back({c.label, train(cfg)});
    }
    return out;
}

} // namespace tricl::train
