#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "tricl/modalities.hpp"
#include "tricl/rng.hpp"

namespace tricl::modal {

enum class Strategy { ND, NM, SM };

inline const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::ND: return "nd";
    case Strategy::NM: return "nm";
    case Strategy::SM: return "sm";
    }
    return "?";
}

namespace detail {

// ceil(ratio * count) guarded against FP slop like 0.2*10 = 2.0000000000000004
inline std::size_t ceil_ratio(double ratio, std::size_t count) {
    TRICL_CHECK(ratio >= 0.0 && ratio < 1.0, "augment: ratio must lie in [0, 1), got " << ratio);
    if (count == 0 || ratio == 0.0) return 0;
    return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(count) - 1e-9));
}

} // namespace detail

// Graph augmentation.
//   ND: drop ceil(ratio*n) random nodes with their incident edges.
//   NM: zero the features of ceil(ratio*n) nodes and ceil(ratio*e) edges
//       (independent draws).
//   SM: mask a BFS region of ceil(ratio*n) nodes around a random anchor,
//       along with the edges internal to the region.
inline MolGraph augment_graph(const MolGraph& g, Strategy strategy, double ratio, Rng& rng) {
    MolGraph out = g;
    const std::size_t n = g.node_count();
    if (n == 0) return out;
    switch (strategy) {
    case Strategy::ND: {
        const std::size_t drop = detail::ceil_ratio(ratio, n);
        TRICL_CHECK(drop < n, "augment_graph: dropping " << drop << " of " << n << " nodes would leave nothing");
        if (drop == 0) return out;
        const auto victims = rng.sample_without_replacement(n, drop);
        std::vector<char> dead(n, 0);
        for (std::size_t v : victims) dead[v] = 1;
        std::vector<std::size_t> remap(n, SIZE_MAX);
        out.nodes.clear();
        for (std::size_t v = 0; v < n; ++v)
            if (!dead[v]) {
                remap[v] = out.nodes.size();
                out.nodes.push_back(g.nodes[v]);
            }
        out.edges.clear();
        for (const MolGraph::Edge& e : g.edges)
            if (!dead[e.u] && !dead[e.v]) out.edges.push_back({remap[e.u], remap[e.v], e.type});
        break;
    }
    case Strategy::NM: {
        const std::size_t mask_nodes = detail::ceil_ratio(ratio, n);
        for (std::size_t v : rng.sample_without_replacement(n, mask_nodes)) out.nodes[v] = {0, 0};
        const std::size_t mask_edges = detail::ceil_ratio(ratio, g.edge_count());
        for (std::size_t e : rng.sample_without_replacement(g.edge_count(), mask_edges)) out.edges[e].type = 0;
        break;
    }
    case Strategy::SM: {
        const std::size_t want = detail::ceil_ratio(ratio, n);
        if (want == 0) return out;
        const std::size_t anchor = rng.index(n);
        const auto adj = g.adjacency();
        std::vector<char> in_region(n, 0);
        std::vector<std::size_t> region;
        std::queue<std::size_t> q;
        q.push(anchor);
        in_region[anchor] = 1;
        while (!q.empty() && region.size() < want) {
            const std::size_t u = q.front();
            q.pop();
            region.push_back(u);
            for (std::size_t v : adj[u])
                if (!in_region[v]) {
                    in_region[v] = 1;
                    q.push(v);
                }
        }
        std::fill(in_region.begin(), in_region.end(), 0);
        for (std::size_t v : region) {
            in_region[v] = 1;
            out.nodes[v] = {0, 0};
        }
        for (MolGraph::Edge& e : out.edges)
            if (in_region[e.u] && in_region[e.v]) e.type = 0;
        break;
    }
    }
    return out;
}

namespace detail {

// Top-level maskable units of a token sequence: an atom or ring token is a
// unit by itself; a branch token plus its governed subsequence is one unit
// (nested structure masks with its enclosing branch, which is what keeps
// spans from ever being partially masked). NOP padding is not maskable.
struct TokenUnit {
    std::size_t begin; // inclusive
    std::size_t end;   // exclusive
    bool has_atom;
};

inline std::vector<TokenUnit> token_units(const TokenSeq& s) {
    std::vector<TokenUnit> units;
    std::size_t i = 0;
    while (i < s.ids.size()) {
        if (s.ids[i] == kTokNop) {
            ++i;
            continue;
        }
        std::size_t end = i + 1;
        if (is_branch_token(s.ids[i]) && s.span[i] > 0) end = i + 1 + static_cast<std::size_t>(s.span[i]);
        end = std::min(end, s.ids.size());
        bool has_atom = false;
        for (std::size_t p = i; p < end; ++p) has_atom = has_atom || is_atom_token(s.ids[p]);
        units.push_back({i, end, has_atom});
        i = end;
    }
    return units;
}

inline void mask_token(TokenSeq& s, std::size_t p) {
    if (is_atom_token(s.ids[p]))
        s.ids[p] = kTokMaskAtom;
    else if (is_branch_token(s.ids[p]) || is_ring_token(s.ids[p]))
        s.ids[p] = kTokMaskBond;
}

} // namespace detail

// Token augmentation. Length is always preserved (masking substitutes in
// place). ND configurations fall back to NM, mirroring the policy used for
// the string modality.
//   NM: mask ceil(ratio * #atom) atom tokens to [MASK_AT] and
//       ceil(ratio * #structure) branch/ring tokens to [MASK_BO].
//   SM: mask a contiguous run of ceil(ratio * #units) top-level units
//       around an anchor atom token; branch spans mask atomically.
inline TokenSeq augment_tokens(const TokenSeq& s, Strategy strategy, double ratio, Rng& rng) {
    TokenSeq out = s;
    if (strategy == Strategy::ND) strategy = Strategy::NM;
    switch (strategy) {
    case Strategy::NM: {
        std::vector<std::size_t> atom_pos, bond_pos;
        for (std::size_t i = 0; i < s.ids.size(); ++i) {
            if (is_atom_token(s.ids[i])) atom_pos.push_back(i);
            if (is_branch_token(s.ids[i]) || is_ring_token(s.ids[i])) bond_pos.push_back(i);
        }
        for (std::size_t k : rng.sample_without_replacement(atom_pos.size(),
                                                            detail::ceil_ratio(ratio, atom_pos.size())))
            out.ids[atom_pos[k]] = kTokMaskAtom;
        for (std::size_t k : rng.sample_without_replacement(bond_pos.size(),
                                                            detail::ceil_ratio(ratio, bond_pos.size())))
            out.ids[bond_pos[k]] = kTokMaskBond;
        break;
    }
    case Strategy::SM: {
        const auto units = detail::token_units(s);
        const std::size_t want = detail::ceil_ratio(ratio, units.size());
        if (want == 0) return out;
        std::vector<std::size_t> anchor_units;
        for (std::size_t u = 0; u < units.size(); ++u)
            if (units[u].has_atom) anchor_units.push_back(u);
        if (anchor_units.empty()) return out; // nothing to anchor on
        const std::size_t seed_unit = anchor_units[rng.index(anchor_units.size())];
        // grow a contiguous window of units around the seed, right first
        std::size_t lo = seed_unit, hi = seed_unit + 1;
        while (hi - lo < want) {
            if (hi < units.size())
                ++hi;
            else if (lo > 0)
                --lo;
            else
                break;
            if (hi - lo < want && lo > 0) --lo;
        }
        for (std::size_t u = lo; u < hi; ++u)
            for (std::size_t p = units[u].begin; p < units[u].end; ++p) detail::mask_token(out, p);
        break;
    }
    case Strategy::ND:
        break;
    }
    return out;
}

// Voxel augmentation: points move to the mask channel, never vanish, so
// total occupancy is conserved. ND falls back to NM.
//   NM: ceil(ratio*n) random points to channel 0.
//   SM: the ceil(ratio*n) points nearest (squared Euclidean, index as the
//       tie-break) to a random anchor point to channel 0.
inline VoxelGrid augment_voxels(const VoxelGrid& v, Strategy strategy, double ratio, Rng& rng) {
    TRICL_CHECK(!v.points.empty(), "augment_voxels: empty grid");
    VoxelGrid out = v;
    if (strategy == Strategy::ND) strategy = Strategy::NM;
    const std::size_t n = v.points.size();
    const std::size_t want = detail::ceil_ratio(ratio, n);
    if (want == 0) return out;
    switch (strategy) {
    case Strategy::NM:
        for (std::size_t k : rng.sample_without_replacement(n, want)) out.points[k].channel = 0;
        break;
    case Strategy::SM: {
        const std::size_t anchor = rng.index(n);
        std::vector<std::pair<double, std::size_t>> by_dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            double d2 = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double diff = v.points[i].pos[a] - v.points[anchor].pos[a];
                d2 += diff * diff;
            }
            by_dist[i] = {d2, i};
        }
        std::sort(by_dist.begin(), by_dist.end());
        for (std::size_t k = 0; k < want; ++k) out.points[by_dist[k].second].channel = 0;
        break;
    }
    case Strategy::ND:
        break;
    }
    return out;
}

} // namespace tricl::modal
