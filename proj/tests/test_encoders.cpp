#include "catch_amalgamated.hpp"

#include <filesystem>

#include "tricl/encoders.hpp"
#include "tricl/gradcheck.hpp"
#include "oracles.hpp"

using namespace tricl;
using namespace tricl::enc;
using Catch::Approx;

namespace {

Dims small_dims() {
    Dims d;
    d.hidden = 8;
    d.joint = 6;
    d.view_dims = {5, 5, 5};
    return d;
}

} // namespace

TEST_CASE("init_params is deterministic with zero biases and GIN eps") {
    const EncoderParams a = init_params(42, Family::Molecule, small_dims());
    const EncoderParams b = init_params(42, Family::Molecule, small_dims());
    REQUIRE(a.params.size() == b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        CHECK(a.params.items()[i].first == b.params.items()[i].first);
        CHECK(a.params.items()[i].second.data() == b.params.items()[i].second.data());
    }
    for (const auto& [name, t] : a.params.items()) {
        if (name.ends_with(".b")) {
            for (double v : t.data()) CHECK(v == 0.0);
        }
        if (name.ends_with(".eps")) CHECK(t.item() == 0.0);
        CHECK(t.requires_grad());
    }
}

TEST_CASE("xavier init variance is near 2/(fan_in+fan_out)") {
    Dims big;
    big.hidden = 100;
    big.view_dims = {100, 100, 100};
    big.joint = 100;
    const EncoderParams p = init_params(7, Family::Latent, big);
    const Tensor& W = p.params.at("main.enc.l1.W"); // 100x100 = 1e4 elements
    REQUIRE(W.size() == 10000);
    double mean = 0.0;
    for (double v : W.data()) mean += v;
    mean /= static_cast<double>(W.size());
    double var = 0.0;
    for (double v : W.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(W.size());
    const double target = 2.0 / 200.0;
    CHECK(var == Approx(target).epsilon(0.10));
}

TEST_CASE("encode_seq") {
    const EncoderParams p = init_params(3, Family::Molecule, small_dims());
    SECTION("all-NOP sequences map through the NOP embedding") {
        modal::TokenSeq nop;
        nop.ids = {modal::kTokNop, modal::kTokNop, modal::kTokNop};
        nop.span = {0, 0, 0};
        const Tensor h = encode_seq(nop, p);
        REQUIRE(h.size() == p.dims.hidden);
        for (double v : h.data()) CHECK(std::isfinite(v));
    }
    SECTION("mean pooling makes permutations encode identically") {
        const modal::MoleculeSample s = modal::gen_toy_molecule(19, 6, 10);
        modal::TokenSeq reversed = s.tokens;
        std::reverse(reversed.ids.begin(), reversed.ids.end());
        std::reverse(reversed.span.begin(), reversed.span.end());
        const Tensor a = encode_seq(s.tokens, p);
        const Tensor b = encode_seq(reversed, p);
        CHECK(oracles::max_rel_err(a, b, 1e-12) <= 1e-12);
    }
    SECTION("unknown token id is an error") {
        modal::TokenSeq bad;
        bad.ids = {modal::kVocabSize};
        bad.span = {0};
        CHECK_THROWS_AS(encode_seq(bad, p), Error);
        CHECK_THROWS_AS(encode_seq(modal::TokenSeq{}, p), Error);
    }
}

TEST_CASE("encode_graph") {
    const EncoderParams p = init_params(4, Family::Molecule, small_dims());
    SECTION("single node is the MLP of its own embedding") {
        modal::MolGraph g;
        g.nodes.push_back({3, 2});
        const Tensor got = encode_graph(g, p);
        // by hand: sum-pool of one row equals two stacked GIN MLPs applied
        // to (1+eps)*h0 with no neighbor contribution
        Tensor h = add(gather_rows(p.params.at("main.label_emb"), {2}),
                       gather_rows(p.params.at("main.tag_emb"), {1}));
        for (int l = 0; l < 2; ++l) {
            const std::string pre = "main.gin" + std::to_string(l);
            h = enc::detail::mlp2_rows(mul(h, add_scalar(p.params.at(pre + ".eps"), 1.0)), p.params, pre);
        }
        CHECK(oracles::max_rel_err(got, sum(h, 0), 1e-12) <= 1e-12);
    }
    SECTION("node relabeling leaves the embedding unchanged") {
        const modal::MoleculeSample s = modal::gen_toy_molecule(23, 5, 9);
        const std::size_t n = s.graph.node_count();
        Rng rng(5);
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        modal::MolGraph relabeled;
        relabeled.nodes.resize(n);
        for (std::size_t v = 0; v < n; ++v) relabeled.nodes[perm[v]] = s.graph.nodes[v];
        for (const auto& e : s.graph.edges) relabeled.edges.push_back({perm[e.u], perm[e.v], e.type});
        const Tensor a = encode_graph(s.graph, p);
        const Tensor b = encode_graph(relabeled, p);
        CHECK(oracles::max_rel_err(a, b, 1e-12) <= 1e-12);
    }
    SECTION("distinct degree sequences produce distinct embeddings") {
        modal::MolGraph path; // 0-1-2-3
        for (int i = 0; i < 4; ++i) path.nodes.push_back({1, 1});
        path.edges = {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}};
        modal::MolGraph star; // 0 adjacent to all
        for (int i = 0; i < 4; ++i) star.nodes.push_back({1, 1});
        star.edges = {{0, 1, 1}, {0, 2, 1}, {0, 3, 1}};
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            const EncoderParams q = init_params(seed, Family::Molecule, small_dims());
            const Tensor a = encode_graph(path, q);
            const Tensor b = encode_graph(star, q);
            double diff = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
            CHECK(diff > 1e-6);
        }
    }
    SECTION("masked features enter as exact zero vectors") {
        modal::MolGraph g;
        g.nodes.push_back({0, 0});
        g.nodes.push_back({0, 0});
        g.edges = {{0, 1, 0}};
        CHECK_NOTHROW(encode_graph(g, p)); // all-masked graph still encodes
    }
}

TEST_CASE("encode_voxel") {
    const EncoderParams p = init_params(6, Family::Molecule, small_dims());
    SECTION("empty channels contribute zero statistics") {
        modal::VoxelGrid v;
        v.points.push_back({{3.0, 4.0, 5.0}, 2});
        const Tensor stats = voxel_stats(v);
        for (std::size_t c = 0; c < v.channels; ++c) {
            if (c == 2) continue;
            for (std::size_t f = 0; f < kVoxelStatsPerChannel; ++f)
                CHECK(stats[c * kVoxelStatsPerChannel + f] == 0.0);
        }
        CHECK(stats[2 * kVoxelStatsPerChannel + 0] == Approx(1.0));
    }
    SECTION("integer-voxel translation shifts centroid features (not invariant)") {
        const modal::MoleculeSample s = modal::gen_toy_molecule(29, 5, 8);
        modal::VoxelGrid shifted = s.voxels;
        bool can_shift = true;
        for (auto& pt : shifted.points) can_shift = can_shift && pt.pos[0] + 1.0 < 15.5;
        if (can_shift) {
            for (auto& pt : shifted.points) pt.pos[0] += 1.0;
            const Tensor a = encode_voxel(s.voxels, p);
            const Tensor b = encode_voxel(shifted, p);
            double diff = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
            CHECK(diff > 1e-9);
        }
    }
    SECTION("empty grid is an error") { CHECK_THROWS_AS(encode_voxel(modal::VoxelGrid{}, p), Error); }
}

TEST_CASE("project") {
    Rng rng(31);
    const EncoderParams p = init_params(8, Family::Latent, small_dims());
    SECTION("outputs are unit-norm") {
        for (int t = 0; t < 10; ++t) {
            Tensor h(Shape{p.dims.hidden});
            for (double& v : h.data()) v = rng.normal();
            const Tensor z = project(h, p, 0);
            double sq = 0.0;
            for (double v : z.data()) sq += v * v;
            CHECK(std::sqrt(sq) == Approx(1.0).margin(1e-12));
        }
    }
    SECTION("projection is nonlinear: scaling the input changes the output") {
        Tensor h(Shape{p.dims.hidden});
        for (double& v : h.data()) v = rng.normal();
        const Tensor a = project(h, p, 1);
        for (double& v : h.data()) v *= 2.0;
        const Tensor b = project(h, p, 1);
        double diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
        CHECK(diff > 1e-9);
    }
}

TEST_CASE("encoder gradients match finite differences") {
    const auto rows = gradcheck::run_all(123, {{2, 4}}, 1);
    for (const auto& r : rows) {
        INFO(r.name << " max_rel_err " << r.max_err);
        CHECK(r.max_err <= 1e-4);
    }
}

TEST_CASE("checkpoint round trip is bit-exact") {
    const auto dir = std::filesystem::temp_directory_path() / "tricl_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "checkpoint.json").string();

    EncoderParams p = init_params(55, Family::Molecule, small_dims());
    // perturb away from the clean init so zeros do not mask defects
    Rng rng(56);
    for (auto& [name, t] : p.params.items())
        for (double& v : t.data()) v += 1e-3 * rng.normal();

    save_checkpoint(path, p);
    const EncoderParams q = load_checkpoint(path);
    CHECK(q.family == p.family);
    CHECK(q.dims.hidden == p.dims.hidden);
    REQUIRE(q.params.size() == p.params.size());
    for (std::size_t i = 0; i < p.params.size(); ++i) {
        CHECK(q.params.items()[i].first == p.params.items()[i].first);
        CHECK(q.params.items()[i].second.shape() == p.params.items()[i].second.shape());
        CHECK(q.params.items()[i].second.data() == p.params.items()[i].second.data()); // bitwise
    }
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.json").string()), Error);
    std::filesystem::remove_all(dir);
}
