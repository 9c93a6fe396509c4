#pragma once

#include <array>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tricl/modalities.hpp"
#include "tricl/rng.hpp"
#include "tricl/tensor.hpp"

namespace tricl::enc {

enum class Family { Latent, Molecule };

inline const char* to_string(Family f) { return f == Family::Latent ? "latent" : "molecule"; }

inline const char* modality_name(std::size_t m) {
    static const char* names[3] = {"main", "aux1", "aux2"};
    return names[m];
}

struct Dims {
    std::size_t hidden = 32;
    std::size_t joint = 32;
    std::array<std::size_t, 3> view_dims{32, 32, 32}; // latent family inputs
};

// Ordered named-tensor registry; iteration order is creation order, which
// keeps initialization and optimizer traversal deterministic.
class ParamSet {
public:
    Tensor& add(const std::string& name, Tensor t) {
        TRICL_CHECK(!has(name), "ParamSet: duplicate parameter " << name);
        items_.emplace_back(name, std::move(t));
        items_.back().second.set_requires_grad(true);
        return items_.back().second;
    }

    bool has(const std::string& name) const {
        for (const auto& [k, v] : items_)
            if (k == name) return true;
        return false;
    }

    const Tensor& at(const std::string& name) const {
        for (const auto& [k, v] : items_)
            if (k == name) return v;
        throw Error("ParamSet: unknown parameter " + name);
    }

    Tensor& at(const std::string& name) {
        for (auto& [k, v] : items_)
            if (k == name) return v;
        throw Error("ParamSet: unknown parameter " + name);
    }

    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

// Every weight tensor of the trimodal model: three encoders plus the three
// projection heads, all requires_grad.
struct EncoderParams {
    Family family = Family::Latent;
    Dims dims;
    ParamSet params;
};

namespace detail {

inline Tensor xavier(Rng& rng, std::size_t fan_in, std::size_t fan_out, Shape shape) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(-a, a);
    return t;
}

inline void add_linear(ParamSet& p, Rng& rng, const std::string& prefix, std::size_t in, std::size_t out) {
    p.add(prefix + ".W", detail::xavier(rng, in, out, Shape{in, out}));
    p.add(prefix + ".b", Tensor(Shape{out}));
}

inline Tensor bias_rows(const Tensor& b, std::size_t rows) {
    return matmul(Tensor(Shape{rows, 1}, 1.0), reshape(b, Shape{1, b.size()}));
}

inline Tensor linear_rows(const Tensor& X, const Tensor& W, const Tensor& b) {
    return add(matmul(X, W), bias_rows(b, X.dim(0)));
}

inline Tensor linear_vec(const Tensor& x, const Tensor& W, const Tensor& b) {
    return add(matmul(x, W), b);
}

inline Tensor mlp2_vec(const Tensor& x, const ParamSet& p, const std::string& prefix) {
    const Tensor h = tanh(linear_vec(x, p.at(prefix + ".l1.W"), p.at(prefix + ".l1.b")));
    return linear_vec(h, p.at(prefix + ".l2.W"), p.at(prefix + ".l2.b"));
}

inline Tensor mlp2_rows(const Tensor& X, const ParamSet& p, const std::string& prefix) {
    const Tensor h = tanh(linear_rows(X, p.at(prefix + ".l1.W"), p.at(prefix + ".l1.b")));
    return linear_rows(h, p.at(prefix + ".l2.W"), p.at(prefix + ".l2.b"));
}

} // namespace detail

constexpr std::size_t kVoxelStatsPerChannel = 7;

inline std::size_t voxel_stat_dim() { return modal::kVoxelChannels * kVoxelStatsPerChannel; }

// Per-channel pooled statistics: occupancy fraction, centroid, second
// moments (coordinates normalized by the grid extent). Channels with no
// points contribute zeros.
inline Tensor voxel_stats(const modal::VoxelGrid& v) {
    TRICL_CHECK(!v.points.empty(), "voxel_stats: empty grid");
    const double extent = static_cast<double>(v.grid_size) * v.resolution;
    Tensor out(Shape{voxel_stat_dim()});
    std::vector<std::size_t> counts(v.channels, 0);
    std::vector<std::array<double, 3>> first(v.channels, {0, 0, 0});
    std::vector<std::array<double, 3>> second(v.channels, {0, 0, 0});
    for (const auto& p : v.points) {
        TRICL_CHECK(p.channel >= 0 && static_cast<std::size_t>(p.channel) < v.channels,
                    "voxel_stats: channel " << p.channel << " out of range");
        const auto c = static_cast<std::size_t>(p.channel);
        ++counts[c];
        for (int a = 0; a < 3; ++a) {
            first[c][a] += p.pos[a] / extent;
            second[c][a] += (p.pos[a] / extent) * (p.pos[a] / extent);
        }
    }
    const double total = static_cast<double>(v.points.size());
    for (std::size_t c = 0; c < v.channels; ++c) {
        double* f = out.data().data() + c * kVoxelStatsPerChannel;
        if (counts[c] == 0) continue;
        const double cnt = static_cast<double>(counts[c]);
        f[0] = cnt / total;
        for (int a = 0; a < 3; ++a) {
            f[1 + a] = first[c][a] / cnt;
            f[4 + a] = second[c][a] / cnt;
        }
    }
    return out;
}

inline EncoderParams init_params(std::uint64_t seed, Family family, const Dims& dims) {
    TRICL_CHECK(dims.hidden >= 1 && dims.joint >= 1, "init_params: dims must be positive");
    EncoderParams out;
    out.family = family;
    out.dims = dims;
    Rng rng(seed);
    ParamSet& p = out.params;
    const std::size_t h = dims.hidden;

    if (family == Family::Latent) {
        for (std::size_t m = 0; m < 3; ++m) {
            const std::string pre = std::string(modality_name(m)) + ".enc";
            detail::add_linear(p, rng, pre + ".l1", dims.view_dims[m], h);
            detail::add_linear(p, rng, pre + ".l2", h, h);
        }
    } else {
        // main: GIN-style graph encoder
        p.add("main.label_emb", detail::xavier(rng, modal::kNumAtomLabels, h, Shape{modal::kNumAtomLabels, h}));
        p.add("main.tag_emb", detail::xavier(rng, modal::kNumTags, h, Shape{modal::kNumTags, h}));
        for (int l = 0; l < 2; ++l) {
            const std::string pre = "main.gin" + std::to_string(l);
            p.add(pre + ".eps", Tensor::scalar(0.0));
            detail::add_linear(p, rng, pre + ".l1", h, h);
            detail::add_linear(p, rng, pre + ".l2", h, h);
        }
        // aux1: token-sequence encoder
        p.add("aux1.tok_emb", detail::xavier(rng, modal::kVocabSize, h, Shape{modal::kVocabSize, h}));
        detail::add_linear(p, rng, "aux1.mlp.l1", h, h);
        detail::add_linear(p, rng, "aux1.mlp.l2", h, h);
        // aux2: voxel-statistics encoder
        detail::add_linear(p, rng, "aux2.mlp.l1", voxel_stat_dim(), h);
        detail::add_linear(p, rng, "aux2.mlp.l2", h, h);
    }
    for (std::size_t m = 0; m < 3; ++m) {
        const std::string pre = std::string(modality_name(m)) + ".proj";
        detail::add_linear(p, rng, pre + ".l1", h, h);
        detail::add_linear(p, rng, pre + ".l2", h, dims.joint);
    }
    return out;
}

// Token-sequence encoder: embedding lookup, mean over positions, 2-layer
// tanh MLP. Permutations of the same token multiset encode identically.
inline Tensor encode_seq(const modal::TokenSeq& tokens, const EncoderParams& p) {
    TRICL_CHECK(p.family == Family::Molecule, "encode_seq: params were built for the latent family");
    TRICL_CHECK(!tokens.ids.empty(), "encode_seq: empty token sequence");
    std::vector<std::size_t> rows(tokens.ids.size());
    for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
        TRICL_CHECK(tokens.ids[i] >= 0 && tokens.ids[i] < modal::kVocabSize,
                    "encode_seq: unknown token id " << tokens.ids[i]);
        rows[i] = static_cast<std::size_t>(tokens.ids[i]);
    }
    const Tensor pooled = mean(gather_rows(p.params.at("aux1.tok_emb"), rows), 0);
    return detail::mlp2_vec(pooled, p.params, "aux1.mlp");
}

// GIN-style graph encoder: h'_v = MLP((1+eps) h_v + sum_{u in N(v)} h_u),
// two layers, sum-pool readout. Masked features (value 0) enter as exact
// zero vectors so they carry no learned content.
inline Tensor encode_graph(const modal::MolGraph& g, const EncoderParams& p) {
    TRICL_CHECK(p.family == Family::Molecule, "encode_graph: params were built for the latent family");
    const std::size_t m = g.node_count();
    TRICL_CHECK(m >= 1, "encode_graph: graph has no nodes");
    g.validate();
    const std::size_t h = p.dims.hidden;

    std::vector<std::size_t> lidx(m), tidx(m);
    Tensor lmask(Shape{m, h}), tmask(Shape{m, h});
    for (std::size_t v = 0; v < m; ++v) {
        lidx[v] = g.nodes[v].label > 0 ? static_cast<std::size_t>(g.nodes[v].label - 1) : 0;
        tidx[v] = g.nodes[v].tag > 0 ? static_cast<std::size_t>(g.nodes[v].tag - 1) : 0;
        for (std::size_t j = 0; j < h; ++j) {
            lmask[v * h + j] = g.nodes[v].label > 0 ? 1.0 : 0.0;
            tmask[v * h + j] = g.nodes[v].tag > 0 ? 1.0 : 0.0;
        }
    }
    Tensor H = add(mul(gather_rows(p.params.at("main.label_emb"), lidx), lmask),
                   mul(gather_rows(p.params.at("main.tag_emb"), tidx), tmask));

    Tensor adj(Shape{m, m});
    for (const auto& e : g.edges) {
        adj[e.u * m + e.v] = 1.0;
        adj[e.v * m + e.u] = 1.0;
    }
    for (int l = 0; l < 2; ++l) {
        const std::string pre = "main.gin" + std::to_string(l);
        const Tensor self = mul(H, add_scalar(p.params.at(pre + ".eps"), 1.0));
        const Tensor agg = add(self, matmul(adj, H));
        H = detail::mlp2_rows(agg, p.params, pre);
    }
    return sum(H, 0);
}

// Voxel encoder: pooled per-channel statistics through a 2-layer tanh MLP.
// Not translation invariant; the centroid features shift with the layout.
inline Tensor encode_voxel(const modal::VoxelGrid& v, const EncoderParams& p) {
    TRICL_CHECK(p.family == Family::Molecule, "encode_voxel: params were built for the latent family");
    return detail::mlp2_vec(voxel_stats(v), p.params, "aux2.mlp");
}

// Continuous encoder for latent-factor views, batched over rows.
inline Tensor encode_latent_rows(const Tensor& X, const EncoderParams& p, std::size_t modality) {
    TRICL_CHECK(p.family == Family::Latent, "encode_latent_rows: params were built for the molecule family");
    TRICL_CHECK(modality < 3, "encode_latent_rows: modality index out of range");
    TRICL_CHECK(X.rank() == 2 && X.dim(1) == p.dims.view_dims[modality],
                "encode_latent_rows: expected [n x " << p.dims.view_dims[modality] << "] views, got "
                                                     << shape_str(X.shape()));
    return detail::mlp2_rows(X, p.params, std::string(modality_name(modality)) + ".enc");
}

// Projection head: per-modality 2-layer MLP onto the joint space followed
// by L2 normalization, so outputs live on the unit sphere. Accepts a single
// vector or a batch of rows.
inline Tensor project(const Tensor& h, const EncoderParams& p, std::size_t modality) {
    TRICL_CHECK(modality < 3, "project: modality index out of range");
    const std::string pre = std::string(modality_name(modality)) + ".proj";
    if (h.rank() == 1) return l2_normalize(detail::mlp2_vec(h, p.params, pre));
    return l2_normalize(detail::mlp2_rows(h, p.params, pre));
}

// ---- checkpointing ------------------------------------------------------

// Versioned JSON blob of named tensors. nlohmann serializes doubles with a
// shortest round-trip representation, so an f64 payload reloads bit-exact.
inline void save_checkpoint(const std::string& path, const EncoderParams& p) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["family"] = to_string(p.family);
    j["dims"] = {{"hidden", p.dims.hidden}, {"joint", p.dims.joint}, {"view_dims", p.dims.view_dims}};
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, t] : p.params.items())
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"data", t.data()}});
    j["tensors"] = std::move(tensors);
    std::ofstream out(path);
    TRICL_CHECK(out.good(), "save_checkpoint: cannot open " << path);
    out << j.dump();
    TRICL_CHECK(out.good(), "save_checkpoint: write to " << path << " failed");
}

inline EncoderParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    TRICL_CHECK(in.good(), "load_checkpoint: cannot open " << path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("load_checkpoint: invalid JSON: ") + e.what());
    }
    TRICL_CHECK(j.value("schema_version", 0) == 1,
                "load_checkpoint: unsupported schema_version " << j.value("schema_version", 0));
    EncoderParams p;
    p.family = j.at("family").get<std::string>() == "latent" ? Family::Latent : Family::Molecule;
    p.dims.hidden = j.at("dims").at("hidden").get<std::size_t>();
    p.dims.joint = j.at("dims").at("joint").get<std::size_t>();
    p.dims.view_dims = j.at("dims").at("view_dims").get<std::array<std::size_t, 3>>();
    for (const auto& t : j.at("tensors")) {
        Tensor tensor(t.at("shape").get<Shape>(), t.at("data").get<std::vector<double>>());
        p.params.add(t.at("name").get<std::string>(), std::move(tensor));
    }
    return p;
}

} // namespace tricl::enc
