// Acceptance suite: runs every gate criterion at its pinned tolerance and
// prints one pass/fail line per criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tricl/cli.hpp"
#include "tricl/gradcheck.hpp"
#include "tricl/trainer.hpp"
#include "oracles.hpp"

using namespace tricl;
namespace fs = std::filesystem;

namespace {

struct Harness {
    int failures = 0;

    void run(int num, const std::string& title, const std::function<bool(std::string&)>& body) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = body(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", num, title.c_str(), secs,
                    detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool criterion_gradients(std::string& detail) {
    // >= 50 random instances per loss over B in {2,3,4}, d in {4,8}
    const auto rows = gradcheck::run_all(2024, {{2, 4}, {2, 8}, {3, 4}, {3, 8}, {4, 4}, {4, 8}}, 9);
    bool ok = true;
    double worst = 0.0;
    std::string worst_name;
    for (const auto& r : rows) {
        ok = ok && r.pass();
        if (r.max_err > worst) {
            worst = r.max_err;
            worst_name = r.name;
        }
    }
    std::ostringstream os;
    os << rows.size() << " paths, worst " << worst_name << " max_rel_err " << cli::fmt(worst);
    detail = os.str();
    return ok;
}

bool criterion_fast_naive(std::string& detail) {
    Rng rng(31337);
    double worst_val = 0.0, worst_grad = 0.0;
    int instance = 0;
    const std::size_t batches[] = {2, 3, 4, 8, 16};
    const std::size_t dims[] = {2, 8, 32};
    while (instance < 100) {
        for (std::size_t B : batches)
            for (std::size_t d : dims) {
                if (instance >= 100) break;
                ++instance;
                Tensor Z1 = oracles::random_matrix(rng, 2 * B, d);
                Tensor Z2 = oracles::random_matrix(rng, 2 * B, d);
                Tensor Z3 = oracles::random_matrix(rng, 2 * B, d);
                for (Tensor* z : {&Z1, &Z2, &Z3}) z->set_requires_grad(true);
                auto diff = [](const geom::AreaSums& s) { return sub(s.pos_mean, s.neg_mean); };

                std::vector<Tensor> naive_grads, fast_grads;
                Graph::active().reset();
                const geom::AreaSums nv = geom::triplet_area_sums_naive(Z1, Z2, Z3);
                {
                    const Gradients g = backward(diff(nv));
                    for (Tensor* z : {&Z1, &Z2, &Z3}) naive_grads.push_back(g.at(*z));
                }
                Graph::active().reset();
                const geom::AreaSums fv = geom::triplet_area_sums_fast(Z1, Z2, Z3);
                {
                    const Gradients g = backward(diff(fv));
                    for (Tensor* z : {&Z1, &Z2, &Z3}) fast_grads.push_back(g.at(*z));
                }

                worst_val = std::max(worst_val, oracles::rel_err(nv.pos_mean.item(), fv.pos_mean.item()));
                worst_val = std::max(worst_val, oracles::rel_err(nv.neg_mean.item(), fv.neg_mean.item()));
                for (std::size_t m = 0; m < 3; ++m)
                    worst_grad = std::max(worst_grad, oracles::max_rel_err(naive_grads[m], fast_grads[m]));
            }
    }
    std::ostringstream os;
    os << "100 instances, worst value rel " << cli::fmt(worst_val) << ", worst grad rel "
       << cli::fmt(worst_grad);
    detail = os.str();
    return worst_val <= 1e-9 && worst_grad <= 1e-9;
}

bool criterion_combinatorics(std::string& detail) {
    bool ok = true;
    Rng rng(99);
    for (std::size_t B : {2ul, 3ul, 5ul}) {
        const Tensor Z = oracles::random_matrix(rng, 2 * B, 4);
        const auto raw = geom::detail::naive_area_sums_raw(Z.data(), Z.data(), Z.data(), 2 * B, 4);
        ok = ok && raw.pos_count == 8 * B && raw.neg_count == 8 * (B * B * B - B);
    }
    ok = ok && geom::alpha(1, 1, 1, 2) == 0.0625;
    ok = ok && geom::alpha(1, 2, 1, 2) == -1.0 / 48.0;
    detail = "counts 8B / 8(B^3-B) for B in {2,3,5}; alpha(B=2) = +1/16, -1/48";
    return ok;
}

bool criterion_collapse(std::string& detail) {
    const auto inter = train::train(train::preset_config(train::Preset::InterNtXent)).final_metrics();
    const auto intra = train::train(train::preset_config(train::Preset::IntraOnly)).final_metrics();
    std::ostringstream os;
    os << "inter_ntxent: intra_align " << cli::fmt(inter.intra_align[0]) << ", inter_align "
       << cli::fmt(inter.inter_align) << "; intra_only: inter_align " << cli::fmt(intra.inter_align)
       << ", intra_combined " << cli::fmt(intra.intra_combined[0]);
    detail = os.str();
    return inter.intra_align[0] >= 0.95 && inter.inter_align >= 0.95 && std::abs(intra.inter_align) <= 0.1 &&
           intra.intra_combined[0] >= 0.5;
}

bool criterion_triangular_advantage(std::string& detail) {
    int combined_wins = 0, uniform_wins = 0;
    std::ostringstream os;
    for (int group = 0; group < 5; ++group) {
        const std::uint64_t base = 100 + 10 * static_cast<std::uint64_t>(group);
        auto with_seeds = [&](train::Preset p) {
            train::TrainConfig cfg = train::preset_config(p);
            cfg.seeds.params = base;
            cfg.seeds.data = base + 1;
            cfg.seeds.aug = base + 2;
            return train::train(cfg).final_metrics();
        };
        const auto tri = with_seeds(train::Preset::JointTriangular);
        const auto ntx = with_seeds(train::Preset::JointNtXent);
        const bool cw = tri.inter_combined > ntx.inter_combined;
        const bool uw = tri.intra_uniform[0] < ntx.intra_uniform[0];
        combined_wins += cw ? 1 : 0;
        uniform_wins += uw ? 1 : 0;
        os << "g" << group << "(" << (cw ? "C" : "-") << (uw ? "U" : "-") << " "
           << cli::fmt(tri.inter_combined) << " vs " << cli::fmt(ntx.inter_combined) << ") ";
    }
    os << "-> combined " << combined_wins << "/5, uniform " << uniform_wins << "/5";
    detail = os.str();
    return combined_wins >= 4 && uniform_wins >= 4;
}

bool criterion_performance(std::string& detail) {
    const cli::BenchResult res = cli::run_bench({8, 16, 32, 64}, 32, 5);
    std::ostringstream os;
    os << "naive exponent " << cli::fmt(res.naive_exponent) << ", fast exponent "
       << cli::fmt(res.fast_exponent) << ", speedup at B=64 " << cli::fmt(res.speedup_last) << "x";
    detail = os.str();
    return res.naive_exponent >= 2.7 && res.fast_exponent <= 1.5 && res.speedup_last >= 20.0;
}

bool criterion_augmentation(std::string& detail) {
    Rng rng(7);
    const std::size_t trials = 600;
    for (std::size_t t = 0; t < trials; ++t) {
        const modal::MoleculeSample mol = modal::gen_toy_molecule(t, 6, 12);
        const std::size_t n = mol.graph.node_count();

        // mask-ratio exactness + no dangling edges after node drop
        const modal::MolGraph nd = modal::augment_graph(mol.graph, modal::Strategy::ND, 0.2, rng);
        if (nd.node_count() != n - (n + 4) / 5) return false;
        nd.validate();

        const modal::MolGraph nm = modal::augment_graph(mol.graph, modal::Strategy::NM, 0.2, rng);
        std::size_t masked_nodes = 0;
        for (const auto& node : nm.nodes) masked_nodes += node.label == 0 ? 1 : 0;
        if (masked_nodes != (n + 4) / 5) return false;

        // branch/ring span atomicity under SM
        const modal::TokenSeq sm = modal::augment_tokens(mol.tokens, modal::Strategy::SM, 0.3, rng);
        if (sm.size() != mol.tokens.size()) return false;
        for (std::size_t i = 0; i < mol.tokens.size(); ++i) {
            if (!modal::is_branch_token(mol.tokens.ids[i]) || mol.tokens.span[i] == 0) continue;
            const bool head = sm.ids[i] != mol.tokens.ids[i];
            for (std::size_t p = i + 1; p <= i + static_cast<std::size_t>(mol.tokens.span[i]); ++p)
                if ((sm.ids[p] != mol.tokens.ids[p]) != head) return false;
        }

        // voxel occupancy conservation and exact point-mask counts
        const modal::VoxelGrid vx = modal::augment_voxels(mol.voxels, modal::Strategy::NM, 0.25, rng);
        if (vx.total_occupancy() != mol.voxels.total_occupancy()) return false;
        std::size_t masked_pts = 0;
        for (const auto& p : vx.points) masked_pts += p.channel == 0 ? 1 : 0;
        if (masked_pts != (mol.voxels.points.size() + 3) / 4) return false;
    }
    detail = std::to_string(trials) + " trials per invariant";
    return true;
}

bool criterion_determinism(std::string& detail) {
    const fs::path root = fs::temp_directory_path() / "tricl_acceptance_determinism";
    fs::remove_all(root);
    std::ostringstream sink;
    const int c1 = cli::cmd_train("", "joint_triangular", (root / "a").string(), sink);
    const int c2 = cli::cmd_train("", "joint_triangular", (root / "b").string(), sink);
    if (c1 != cli::kExitOk || c2 != cli::kExitOk) {
        detail = "training exited nonzero";
        return false;
    }
    const bool same = read_file((root / "a" / "metrics.csv").string()) ==
                      read_file((root / "b" / "metrics.csv").string());
    fs::remove_all(root);
    detail = same ? "metrics.csv byte-identical across re-runs" : "metrics.csv differs";
    return same;
}

} // namespace

int main() {
    Harness h;
    h.run(1, "gradient correctness vs finite differences (<= 1e-4)", criterion_gradients);
    h.run(2, "naive == fast triplet sums, values and gradients (<= 1e-9)", criterion_fast_naive);
    h.run(3, "triplet combinatorics and alpha weights", criterion_combinatorics);
    h.run(4, "collapse reproduction (line collapse + intra-only spread)", criterion_collapse);
    h.run(5, "triangular-loss advantage over pairwise NT-Xent (4/5 seed groups)",
          criterion_triangular_advantage);
    h.run(6, "naive >= O(B^2.7), fast <= O(B^1.5), >= 20x speedup at B=64", criterion_performance);
    h.run(7, "augmentation invariants over 600 random trials", criterion_augmentation);
    h.run(8, "byte-identical metrics.csv across identical re-runs", criterion_determinism);
    if (h.failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", h.failures);
    return 1;
}
