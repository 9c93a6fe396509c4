#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <queue>
#include <vector>

#include "tricl/check.hpp"
#include "tricl/rng.hpp"

namespace tricl::modal {

// Desk-scale token vocabulary. Reserved ids 0-2 keep the production
// tokenizer's semantics: 0 padding/no-op, 1 atom mask, 2 branch/ring mask.
constexpr int kTokNop = 0;
constexpr int kTokMaskAtom = 1;
constexpr int kTokMaskBond = 2;
constexpr int kNumAtomLabels = 16;
constexpr int kNumTags = 4;
constexpr int kNumEdgeTypes = 4;
constexpr int kAtomTokenBase = 3;                              // ids 3..18
constexpr int kBranchTokenBase = kAtomTokenBase + kNumAtomLabels; // ids 19..22
constexpr int kNumBranchTokens = 4;
constexpr int kRingTokenBase = kBranchTokenBase + kNumBranchTokens; // ids 23..26
constexpr int kNumRingTokens = 4;
constexpr int kVocabSize = kRingTokenBase + kNumRingTokens; // 27

constexpr std::size_t kGridSize = 16;                    // G
constexpr std::size_t kVoxelChannels = kNumAtomLabels + 1; // channel 0 = mask
constexpr double kGridResolution = 1.0;

inline bool is_atom_token(int id) { return id >= kAtomTokenBase && id < kAtomTokenBase + kNumAtomLabels; }
inline bool is_branch_token(int id) { return id >= kBranchTokenBase && id < kBranchTokenBase + kNumBranchTokens; }
inline bool is_ring_token(int id) { return id >= kRingTokenBase && id < kRingTokenBase + kNumRingTokens; }

// 1D view. `span[i]` annotates structure tokens: for a branch token, the
// length of the governed subsequence that immediately follows; for a ring
// token, the distance back to the ring-opening atom token. Zero elsewhere.
struct TokenSeq {
    std::vector<int> ids;
    std::vector<int> span;

    std::size_t size() const { return ids.size(); }

    std::size_t atom_count() const {
        std::size_t c = 0;
        for (int id : ids) c += is_atom_token(id) ? 1 : 0;
        return c;
    }

    void validate() const {
        TRICL_CHECK(ids.size() == span.size(), "TokenSeq: ids/span length mismatch");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            TRICL_CHECK(ids[i] >= 0 && ids[i] < kVocabSize, "TokenSeq: id " << ids[i] << " out of vocabulary");
            TRICL_CHECK(span[i] >= 0, "TokenSeq: negative span at " << i);
            if (span[i] == 0) continue;
            const std::size_t s = static_cast<std::size_t>(span[i]);
            const bool fwd_ok = i + s < ids.size(); // branch: governed subsequence follows
            const bool bwd_ok = s <= i;             // ring: references an earlier token
            if (is_branch_token(ids[i]))
                TRICL_CHECK(fwd_ok, "TokenSeq: branch span at " << i << " exceeds sequence");
            else if (is_ring_token(ids[i]))
                TRICL_CHECK(bwd_ok, "TokenSeq: ring span at " << i << " reaches before the sequence");
            else // masked structure token: original direction is unknown
                TRICL_CHECK(fwd_ok || bwd_ok, "TokenSeq: span at " << i << " references no valid subsequence");
        }
    }
};

// 2D view: categorical node features (label, tag) and undirected typed
// edges. Feature value 0 means masked.
struct MolGraph {
    struct Node {
        int label = 0;
        int tag = 0;
    };
    struct Edge {
        std::size_t u = 0;
        std::size_t v = 0;
        int type = 0;
    };

    std::vector<Node> nodes;
    std::vector<Edge> edges;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t edge_count() const { return edges.size(); }

    void validate() const {
        for (const Edge& e : edges) {
            TRICL_CHECK(e.u != e.v, "MolGraph: self-loop at node " << e.u);
            TRICL_CHECK(e.u < nodes.size() && e.v < nodes.size(),
                        "MolGraph: edge (" << e.u << "," << e.v << ") references missing node");
        }
        for (const Node& n : nodes) {
            TRICL_CHECK(n.label >= 0 && n.label <= kNumAtomLabels, "MolGraph: node label out of range");
            TRICL_CHECK(n.tag >= 0 && n.tag <= kNumTags, "MolGraph: node tag out of range");
        }
    }

    std::vector<std::vector<std::size_t>> adjacency() const {
        std::vector<std::vector<std::size_t>> adj(nodes.size());
        for (const Edge& e : edges) {
            adj[e.u].push_back(e.v);
            adj[e.v].push_back(e.u);
        }
        for (auto& nb : adj) std::sort(nb.begin(), nb.end());
        return adj;
    }

    bool connected() const {
        if (nodes.empty()) return true;
        const auto adj = adjacency();
        std::vector<char> seen(nodes.size(), 0);
        std::queue<std::size_t> q;
        q.push(0);
        seen[0] = 1;
        std::size_t visited = 1;
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop();
            for (std::size_t v : adj[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    ++visited;
                    q.push(v);
                }
        }
        return visited == nodes.size();
    }
};

// 3D view: points placed in a G^3 cube, each carrying an element-class
// channel (0 = mask). Occupancy is derived from the points, so total
// occupancy always equals the number of placed points.
struct VoxelGrid {
    struct Point {
        std::array<double, 3> pos{};
        int channel = 0;
    };

    std::size_t grid_size = kGridSize;
    std::size_t channels = kVoxelChannels;
    double resolution = kGridResolution;
    std::vector<Point> points;

    std::size_t total_occupancy() const { return points.size(); }

    std::array<std::size_t, 3> voxel_of(const Point& p) const {
        std::array<std::size_t, 3> v{};
        for (int a = 0; a < 3; ++a) {
            const double idx = std::floor(p.pos[a] / resolution);
            TRICL_CHECK(idx >= 0.0 && idx < static_cast<double>(grid_size),
                        "VoxelGrid: point coordinate " << p.pos[a] << " outside the grid");
            v[a] = static_cast<std::size_t>(idx);
        }
        return v;
    }

    // dense per-channel occupancy counts, laid out [channel][x][y][z]
    std::vector<std::uint32_t> occupancy() const {
        std::vector<std::uint32_t> counts(channels * grid_size * grid_size * grid_size, 0);
        for (const Point& p : points) {
            TRICL_CHECK(p.channel >= 0 && static_cast<std::size_t>(p.channel) < channels,
                        "VoxelGrid: channel " << p.channel << " out of range");
            const auto v = voxel_of(p);
            counts[((static_cast<std::size_t>(p.channel) * grid_size + v[0]) * grid_size + v[1]) * grid_size +
                   v[2]] += 1;
        }
        return counts;
    }
};

struct LatentSample {
    std::vector<double> z;                       // shared latent [k]
    std::array<std::vector<double>, 3> views;    // tanh(A_m z + b_m) + noise
};

struct MoleculeSample {
    TokenSeq tokens;
    MolGraph graph;
    VoxelGrid voxels;
};

// Latent-factor world: three random affine-tanh view maps of one latent
// vector, view_m = tanh(A_m z + b_m) + noise. The maps are drawn once per
// generator seed; noise draws are the augmentation channel.
//
// A_m is drawn block-sparse: the first `shared` latent coordinates feed
// every modality, the rest split into three modality-private blocks. Both
// augmentations of a sample share the full latent, so the intramodal task
// stays learnable, while only the shared block carries cross-modal signal.
class LatentFactorModel {
public:
    LatentFactorModel(std::uint64_t seed, std::size_t k, std::array<std::size_t, 3> view_dims,
                      std::size_t shared = 2)
        : k_(k), view_dims_(view_dims) {
        TRICL_CHECK(k >= 1, "LatentFactorModel: k must be >= 1");
        TRICL_CHECK(shared <= k, "LatentFactorModel: shared dims exceed k");
        Rng rng(seed);
        const std::size_t priv = (k - shared) / 3;
        for (std::size_t m = 0; m < 3; ++m) {
            A_[m].assign(view_dims[m] * k, 0.0);
            b_[m].assign(view_dims[m], 0.0);
            const std::size_t priv_begin = shared + m * priv;
            const std::size_t priv_end = m == 2 ? k : priv_begin + priv;
            std::vector<std::size_t> active;
            for (std::size_t j = 0; j < shared; ++j) active.push_back(j);
            for (std::size_t j = priv_begin; j < priv_end; ++j) active.push_back(j);
            if (active.empty())
                for (std::size_t j = 0; j < k; ++j) active.push_back(j);
            const double scale = 1.0 / std::sqrt(static_cast<double>(active.size()));
            for (std::size_t i = 0; i < view_dims[m]; ++i)
                for (std::size_t j : active) A_[m][i * k_ + j] = scale * rng.normal();
            for (double& w : b_[m]) w = 0.2 * rng.normal();
        }
    }

    std::size_t latent_dim() const { return k_; }
    std::size_t view_dim(std::size_t m) const { return view_dims_[m]; }

    std::vector<double> sample_latent(Rng& rng) const {
        std::vector<double> z(k_);
        for (double& v : z) v = rng.normal();
        return z;
    }

    std::vector<double> view(std::size_t m, const std::vector<double>& z, double noise_sigma, Rng& rng) const {
        TRICL_CHECK(m < 3, "LatentFactorModel::view: modality index out of range");
        TRICL_CHECK(z.size() == k_, "LatentFactorModel::view: latent has wrong length");
        std::vector<double> out(view_dims_[m]);
        for (std::size_t i = 0; i < out.size(); ++i) {
            double acc = b_[m][i];
            for (std::size_t j = 0; j < k_; ++j) acc += A_[m][i * k_ + j] * z[j];
            out[i] = std::tanh(acc);
        }
        if (noise_sigma > 0.0)
            for (double& v : out) v += noise_sigma * rng.normal();
        return out;
    }

private:
    std::size_t k_;
    std::array<std::size_t, 3> view_dims_;
    std::array<std::vector<double>, 3> A_;
    std::array<std::vector<double>, 3> b_;
};

inline std::vector<LatentSample> gen_latent_batch(std::uint64_t seed, std::size_t B, std::size_t k,
                                                  std::array<std::size_t, 3> view_dims, double noise_sigma,
                                                  std::size_t shared = 2) {
    TRICL_CHECK(B >= 2, "gen_latent_batch: B must be >= 2");
    LatentFactorModel model(seed, k, view_dims, shared);
    Rng rng(seed, /*stream=*/1);
    std::vector<LatentSample> out(B);
    for (LatentSample& s : out) {
        s.z = model.sample_latent(rng);
        for (std::size_t m = 0; m < 3; ++m) s.views[m] = model.view(m, s.z, noise_sigma, rng);
    }
    return out;
}

namespace detail {

struct Serializer {
    const std::vector<std::vector<std::size_t>>& children;
    const std::vector<std::vector<std::size_t>>& ring_partners;
    const std::vector<MolGraph::Node>& nodes;
    TokenSeq seq;
    std::vector<int> atom_pos; // token position of each node's atom token

    void emit(int id, int span) {
        seq.ids.push_back(id);
        seq.span.push_back(span);
    }

    void serialize(std::size_t v) {
        atom_pos[v] = static_cast<int>(seq.ids.size());
        emit(kAtomTokenBase + nodes[v].label - 1, 0);
        // ring closure emitted at whichever endpoint is serialized second
        for (std::size_t u : ring_partners[v]) {
            if (atom_pos[u] < 0) continue;
            const int dist = static_cast<int>(seq.ids.size()) - atom_pos[u];
            emit(kRingTokenBase + std::min(dist - 1, kNumRingTokens - 1), dist);
        }
        const auto& ch = children[v];
        for (std::size_t i = 0; i + 1 < ch.size(); ++i) { // all but the last child get a branch wrapper
            const std::size_t branch_pos = seq.ids.size();
            emit(kBranchTokenBase, 0); // id patched once the span is known
            serialize(ch[i]);
            const int span = static_cast<int>(seq.ids.size() - branch_pos) - 1;
            seq.span[branch_pos] = span;
            seq.ids[branch_pos] = kBranchTokenBase + std::min(span - 1, kNumBranchTokens - 1);
        }
        if (!ch.empty()) serialize(ch.back()); // last child continues the chain
    }
};

} // namespace detail

// One synthetic object rendered in all three formats: a random labeled tree
// with optional ring closures (2D), its DFS serialization with branch/ring
// tokens (1D), and a random 3D layout voxelized in the G=16 cube (3D). The
// three views share the node multiset.
inline MoleculeSample gen_toy_molecule(std::uint64_t seed, std::size_t n_min, std::size_t n_max) {
    TRICL_CHECK(n_min >= 2 && n_min <= n_max, "gen_toy_molecule: need 2 <= n_min <= n_max");
    Rng rng(seed);
    const std::size_t n = n_min + rng.index(n_max - n_min + 1);

    MoleculeSample out;
    MolGraph& g = out.graph;
    g.nodes.resize(n);
    for (MolGraph::Node& nd : g.nodes) {
        nd.label = 1 + static_cast<int>(rng.index(kNumAtomLabels));
        nd.tag = 1 + static_cast<int>(rng.index(kNumTags));
    }
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t v = 1; v < n; ++v) {
        const std::size_t parent = rng.index(v);
        children[parent].push_back(v);
        g.edges.push_back({parent, v, 1 + static_cast<int>(rng.index(kNumEdgeTypes))});
    }

    // optional ring closures between non-adjacent pairs
    std::vector<std::vector<std::size_t>> ring_partners(n);
    const std::size_t n_rings = n >= 4 ? rng.index(n / 4 + 1) : 0;
    auto has_edge = [&](std::size_t a, std::size_t b) {
        for (const auto& e : g.edges)
            if ((e.u == a && e.v == b) || (e.u == b && e.v == a)) return true;
        return false;
    };
    for (std::size_t t = 0; t < n_rings; ++t) {
        const std::size_t a = rng.index(n), b = rng.index(n);
        if (a == b || has_edge(a, b)) continue;
        ring_partners[a].push_back(b);
        ring_partners[b].push_back(a);
        g.edges.push_back({a, b, 1 + static_cast<int>(rng.index(kNumEdgeTypes))});
    }

    detail::Serializer ser{children, ring_partners, g.nodes, {}, std::vector<int>(n, -1)};
    ser.serialize(0);
    out.tokens = std::move(ser.seq);

    VoxelGrid& vg = out.voxels;
    for (std::size_t v = 0; v < n; ++v) {
        VoxelGrid::Point p;
        for (int a = 0; a < 3; ++a)
            p.pos[a] = rng.uniform(0.5, static_cast<double>(kGridSize) * kGridResolution - 0.5);
        p.channel = g.nodes[v].label; // labels 1..16 -> channels 1..16
        vg.points.push_back(p);
    }
    return out;
}

// sequential sample-seed stream for corpora
inline std::vector<MoleculeSample> gen_molecule_corpus(std::uint64_t seed, std::size_t count, std::size_t n_min,
                                                       std::size_t n_max) {
    Rng rng(seed);
    std::vector<MoleculeSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(gen_toy_molecule(rng.below(UINT64_MAX), n_min, n_max));
    return out;
}

} // namespace tricl::modal
