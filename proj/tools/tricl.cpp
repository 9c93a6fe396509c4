// Command-line front end: presets, ablations, gradient checks, the
// naive-vs-fast benchmark and the five-row metrics table.

#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tricl/cli.hpp"
#include "tricl/corpus.hpp"

namespace {

std::vector<std::pair<std::size_t, std::size_t>> parse_sizes(const std::vector<std::string>& specs) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const std::string& s : specs) {
        const auto x = s.find('x');
        if (x == std::string::npos) throw CLI::ValidationError("--sizes", "expected BxD, e.g. 3x8");
        out.emplace_back(std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1)));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"trimodal contrastive-learning engine (triangular area loss)"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir;
    auto* train = app.add_subcommand("train", "run a preset or a JSON experiment config");
    train->add_option("--config", config_path, "experiment config JSON")->check(CLI::ExistingFile);
    train->add_option("--preset", preset,
                      "intra_only | inter_ntxent | inter_triangular | joint_ntxent | joint_triangular | ablate_3a");
    train->add_option("--out", out_dir, "output directory (metrics.csv, summary.json, checkpoint.json)");

    std::uint64_t seed = 17;
    std::vector<std::string> size_specs;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss and encoder path");
    gradcheck->add_option("--seed", seed, "random seed");
    gradcheck->add_option("--sizes", size_specs, "loss-check sizes as BxD (default 2x4 .. 4x8)");

    std::vector<std::size_t> bench_B{8, 16, 32, 64};
    std::size_t bench_d = 32, bench_reps = 5;
    std::string bench_out = "bench";
    auto* bench = app.add_subcommand("bench", "naive vs factorized triplet-sum timing");
    bench->add_option("--B", bench_B, "batch sizes");
    bench->add_option("--d", bench_d, "embedding dimension");
    bench->add_option("--reps", bench_reps, "repetitions per size");
    bench->add_option("--out", bench_out, "output directory for bench.csv");

    std::string table1_out = "table1";
    auto* table1 = app.add_subcommand("table1", "run the five loss presets and emit the metrics table");
    table1->add_option("--out", table1_out, "output directory for table1.csv");

    std::string corpus_path;
    std::size_t corpus_count = 100, corpus_nmin = 4, corpus_nmax = 10;
    std::uint64_t corpus_seed = 5;
    auto* gen = app.add_subcommand("gen-corpus", "dump generated trimodal samples as JSON lines");
    gen->add_option("--out", corpus_path, "output .jsonl path")->required();
    gen->add_option("--count", corpus_count, "number of samples");
    gen->add_option("--seed", corpus_seed, "generator seed");
    gen->add_option("--nodes-min", corpus_nmin, "minimum node count");
    gen->add_option("--nodes-max", corpus_nmax, "maximum node count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : tricl::cli::kExitConfig;
    }

    try {
        if (train->parsed()) return tricl::cli::cmd_train(config_path, preset, out_dir);
        if (gradcheck->parsed()) return tricl::cli::cmd_gradcheck(seed, parse_sizes(size_specs));
        if (bench->parsed()) return tricl::cli::cmd_bench(bench_B, bench_d, bench_reps, bench_out);
        if (table1->parsed()) return tricl::cli::cmd_table1(table1_out);
        if (gen->parsed()) {
            tricl::modal::dump_corpus(corpus_path,
                                      tricl::modal::gen_molecule_corpus(corpus_seed, corpus_count, corpus_nmin,
                                                                        corpus_nmax));
            return tricl::cli::kExitOk;
        }
    } catch (const tricl::NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return tricl::cli::kExitNumerical;
    } catch (const tricl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return tricl::cli::kExitConfig;
    }
    return tricl::cli::kExitConfig;
}
