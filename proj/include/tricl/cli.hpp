#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "tricl/gradcheck.hpp"
#include "tricl/trainer.hpp"

namespace tricl::cli {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;     // invalid config / CLI usage
constexpr int kExitNumerical = 3;  // training or evaluation aborted on non-finite values
constexpr int kExitAssert = 4;     // acceptance-style assertion failed

// ---- formatting ----------------------------------------------------------

// fixed 12-significant-digit formatting keeps CSV output diff-able
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

namespace detail {

inline std::filesystem::path resolve_out_dir(const std::string& out_dir) {
    TRICL_CHECK(!out_dir.empty(), "no output directory given (use --out or the config's out_dir)");
    std::filesystem::path p(out_dir);
    if (const char* root = std::getenv("TRICL_OUT_ROOT"); root != nullptr && *root != '\0' && p.is_relative())
        p = std::filesystem::path(root) / p;
    std::filesystem::create_directories(p);
    return p;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    TRICL_CHECK(out.good(), "cannot open " << path.string() << " for writing");
    return out;
}

} // namespace detail

// ---- config (strict JSON, schema-versioned) -------------------------------

struct ExperimentConfig {
    train::TrainConfig train;
    std::string preset;  // optional preset base / label
    std::string out_dir; // optional; CLI --out overrides
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    TRICL_CHECK(j.is_object(), "config: expected an object at " << where);
    for (const auto& [key, _] : j.items())
        TRICL_CHECK(std::find(allowed.begin(), allowed.end(), key) != allowed.end(),
                    "config: unknown field '" << key << "' at " << where);
}

template <typename T>
inline void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline modal::Strategy strategy_from_string(const std::string& s) {
    if (s == "nd") return modal::Strategy::ND;
    if (s == "nm") return modal::Strategy::NM;
    if (s == "sm") return modal::Strategy::SM;
    throw Error("config: unknown augmentation strategy '" + s + "' (expected nd|nm|sm)");
}

inline void maybe_strategies(const json& j, const char* key, std::vector<modal::Strategy>& out) {
    if (!j.contains(key)) return;
    out.clear();
    for (const auto& s : j.at(key)) out.push_back(strategy_from_string(s.get<std::string>()));
}

inline losses::InterVariant inter_variant_from_string(const std::string& s) {
    if (s == "none") return losses::InterVariant::None;
    if (s == "nt_xent_pairwise") return losses::InterVariant::NtXentPairwise;
    if (s == "triplet_margin") return losses::InterVariant::TripletMargin;
    if (s == "triangular_area") return losses::InterVariant::TriangularArea;
    throw Error("config: unknown inter_variant '" + s + "'");
}

inline void apply_train_overrides(const json& j, train::TrainConfig& cfg) {
    reject_unknown(j, {"batch_size", "epochs", "steps_per_epoch", "lr_init", "weight_decay", "warmup_epochs",
                       "inter_gate_epochs", "eval_every", "eval_batch", "family", "loss", "dims", "data", "aug",
                       "seeds"},
                   "train");
    maybe(j, "batch_size", cfg.batch_size);
    maybe(j, "epochs", cfg.epochs);
    maybe(j, "steps_per_epoch", cfg.steps_per_epoch);
    maybe(j, "lr_init", cfg.lr_init);
    maybe(j, "weight_decay", cfg.weight_decay);
    maybe(j, "warmup_epochs", cfg.warmup_epochs);
    maybe(j, "inter_gate_epochs", cfg.inter_gate_epochs);
    maybe(j, "eval_every", cfg.eval_every);
    maybe(j, "eval_batch", cfg.eval_batch);
    if (j.contains("family")) {
        const std::string f = j.at("family").get<std::string>();
        TRICL_CHECK(f == "latent" || f == "molecule", "config: unknown family '" << f << "'");
        cfg.family = f == "latent" ? enc::Family::Latent : enc::Family::Molecule;
    }
    if (j.contains("loss")) {
        const json& l = j.at("loss");
        reject_unknown(l, {"tau", "lambda_inter", "lambda_main", "margin", "inter_variant", "intra_enabled"},
                       "train.loss");
        maybe(l, "tau", cfg.loss.tau);
        maybe(l, "lambda_inter", cfg.loss.lambda_inter);
        maybe(l, "lambda_main", cfg.loss.lambda_main);
        maybe(l, "margin", cfg.loss.margin);
        if (l.contains("inter_variant"))
            cfg.loss.inter_variant = inter_variant_from_string(l.at("inter_variant").get<std::string>());
        maybe(l, "intra_enabled", cfg.loss.intra_enabled);
    }
    if (j.contains("dims")) {
        const json& d = j.at("dims");
        reject_unknown(d, {"hidden", "joint", "view_dims"}, "train.dims");
        maybe(d, "hidden", cfg.dims.hidden);
        maybe(d, "joint", cfg.dims.joint);
        maybe(d, "view_dims", cfg.dims.view_dims);
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown(d, {"latent_k", "latent_shared", "noise_sigma", "mol_nodes_min", "mol_nodes_max"},
                       "train.data");
        maybe(d, "latent_k", cfg.data.latent_k);
        maybe(d, "latent_shared", cfg.data.latent_shared);
        maybe(d, "noise_sigma", cfg.data.noise_sigma);
        maybe(d, "mol_nodes_min", cfg.data.mol_nodes_min);
        maybe(d, "mol_nodes_max", cfg.data.mol_nodes_max);
    }
    if (j.contains("aug")) {
        const json& a = j.at("aug");
        reject_unknown(a, {"nd_ratio", "nm_ratio", "sm_ratio", "graph", "seq", "voxel"}, "train.aug");
        maybe(a, "nd_ratio", cfg.aug.nd_ratio);
        maybe(a, "nm_ratio", cfg.aug.nm_ratio);
        maybe(a, "sm_ratio", cfg.aug.sm_ratio);
        maybe_strategies(a, "graph", cfg.aug.graph);
        maybe_strategies(a, "seq", cfg.aug.seq);
        maybe_strategies(a, "voxel", cfg.aug.voxel);
    }
    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        reject_unknown(s, {"params", "data", "aug"}, "train.seeds");
        maybe(s, "params", cfg.seeds.params);
        maybe(s, "data", cfg.seeds.data);
        maybe(s, "aug", cfg.seeds.aug);
    }
}

inline json train_config_to_json(const train::TrainConfig& cfg) {
    json j;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["steps_per_epoch"] = cfg.steps_per_epoch;
    j["lr_init"] = cfg.lr_init;
    j["weight_decay"] = cfg.weight_decay;
    j["warmup_epochs"] = cfg.warmup_epochs;
    j["inter_gate_epochs"] = cfg.inter_gate_epochs;
    j["eval_every"] = cfg.eval_every;
    j["eval_batch"] = cfg.eval_batch;
    j["family"] = enc::to_string(cfg.family);
    j["loss"] = {{"tau", cfg.loss.tau},
                 {"lambda_inter", cfg.loss.lambda_inter},
                 {"lambda_main", cfg.loss.lambda_main},
                 {"margin", cfg.loss.margin},
                 {"inter_variant", losses::to_string(cfg.loss.inter_variant)},
                 {"intra_enabled", cfg.loss.intra_enabled}};
    j["dims"] = {{"hidden", cfg.dims.hidden}, {"joint", cfg.dims.joint}, {"view_dims", cfg.dims.view_dims}};
    j["data"] = {{"latent_k", cfg.data.latent_k},
                 {"latent_shared", cfg.data.latent_shared},
                 {"noise_sigma", cfg.data.noise_sigma},
                 {"mol_nodes_min", cfg.data.mol_nodes_min},
                 {"mol_nodes_max", cfg.data.mol_nodes_max}};
    auto strat_names = [](const std::vector<modal::Strategy>& v) {
        std::vector<std::string> out;
        for (modal::Strategy s : v) out.emplace_back(modal::to_string(s));
        return out;
    };
    j["aug"] = {{"nd_ratio", cfg.aug.nd_ratio},   {"nm_ratio", cfg.aug.nm_ratio},
                {"sm_ratio", cfg.aug.sm_ratio},   {"graph", strat_names(cfg.aug.graph)},
                {"seq", strat_names(cfg.aug.seq)}, {"voxel", strat_names(cfg.aug.voxel)}};
    j["seeds"] = {{"params", cfg.seeds.params}, {"data", cfg.seeds.data}, {"aug", cfg.seeds.aug}};
    return j;
}

} // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    detail::reject_unknown(j, {"schema_version", "preset", "out_dir", "train"}, "top level");
    TRICL_CHECK(j.contains("schema_version"), "config: missing schema_version");
    TRICL_CHECK(j.at("schema_version").is_number_integer() && j.at("schema_version").get<int>() == 1,
                "config: unsupported schema_version (expected 1)");
    ExperimentConfig cfg;
    if (j.contains("preset")) {
        cfg.preset = j.at("preset").get<std::string>();
        const train::Preset p = train::preset_from_string(cfg.preset);
        TRICL_CHECK(p != train::Preset::Ablate3a, "config: ablate_3a cannot be used as a config base");
        cfg.train = train::preset_config(p);
    }
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("train")) detail::apply_train_overrides(j.at("train"), cfg.train);
    cfg.train.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    TRICL_CHECK(in.good(), "config: cannot open " << path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("config: " + path + ": " + e.what());
    }
    try {
        return parse_experiment_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw Error("config: " + path + ": " + e.what());
    }
}

// ---- output files ---------------------------------------------------------

inline const char* kMetricsHeader =
    "epoch,step,lr,loss_total,loss_intra_main,loss_intra_aux1,loss_intra_aux2,loss_inter,"
    "intra_align_main,intra_uniform_main,intra_combined_main,"
    "intra_align_aux1,intra_uniform_aux1,intra_combined_aux1,"
    "intra_align_aux2,intra_uniform_aux2,intra_combined_aux2,"
    "inter_align,inter_uniform,inter_combined";

inline void write_metrics_csv(std::ostream& out, const train::MetricsLog& log) {
    out << kMetricsHeader << "\n";
    std::map<long, const metrics::SpaceMetrics*> eval_at;
    for (const auto& e : log.evals) eval_at[e.epoch] = &e;
    auto write_eval_row = [&](const metrics::SpaceMetrics& m) {
        out << m.epoch << ",,,,,,,";
        for (std::size_t i = 0; i < 3; ++i)
            out << "," << fmt(m.intra_align[i]) << "," << fmt(m.intra_uniform[i]) << ","
                << fmt(m.intra_combined[i]);
        out << "," << fmt(m.inter_align) << "," << fmt(m.inter_uniform) << "," << fmt(m.inter_combined) << "\n";
    };
    for (std::size_t i = 0; i < log.steps.size(); ++i) {
        const train::StepRow& r = log.steps[i];
        out << r.epoch << "," << r.step << "," << fmt(r.lr) << "," << fmt(r.total) << "," << fmt(r.intra_main)
            << "," << fmt(r.intra_aux1) << "," << fmt(r.intra_aux2) << "," << fmt(r.inter)
            << ",,,,,,,,,,,,\n";
        const bool epoch_done = i + 1 == log.steps.size() || log.steps[i + 1].epoch != r.epoch;
        if (epoch_done)
            if (auto it = eval_at.find(static_cast<long>(r.epoch)); it != eval_at.end())
                write_eval_row(*it->second);
    }
}

inline nlohmann::json metrics_to_json(const metrics::SpaceMetrics& m) {
    nlohmann::json j;
    j["epoch"] = m.epoch;
    const char* mods[3] = {"main", "aux1", "aux2"};
    for (std::size_t i = 0; i < 3; ++i) {
        j[std::string("intra_align_") + mods[i]] = m.intra_align[i];
        j[std::string("intra_uniform_") + mods[i]] = m.intra_uniform[i];
        j[std::string("intra_combined_") + mods[i]] = m.intra_combined[i];
    }
    j["inter_align"] = m.inter_align;
    j["inter_uniform"] = m.inter_uniform;
    j["inter_combined"] = m.inter_combined;
    return j;
}

// ---- commands --------------------------------------------------------------

// train: run a preset or a config file, emit metrics.csv + summary.json +
// checkpoint.json into the output directory.
inline int cmd_train(const std::string& config_path, const std::string& preset_name, const std::string& out_dir,
                     std::ostream& log = std::cerr) {
    ExperimentConfig cfg;
    bool is_ablate = false;
    try {
        TRICL_CHECK(!config_path.empty() || !preset_name.empty(), "cmd_train: need a config file or --preset");
        if (!config_path.empty()) {
            cfg = load_experiment_config(config_path);
            if (!preset_name.empty()) {
                TRICL_CHECK(cfg.preset.empty() || cfg.preset == preset_name,
                            "cmd_train: --preset conflicts with the config's preset");
                cfg.preset = preset_name;
            }
        } else {
            cfg.preset = preset_name;
            const train::Preset p = train::preset_from_string(preset_name);
            is_ablate = p == train::Preset::Ablate3a;
            if (!is_ablate) cfg.train = train::preset_config(p);
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
    } catch (const Error& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        const std::filesystem::path dir = detail::resolve_out_dir(cfg.out_dir);
        std::vector<train::LabeledRun> runs;
        if (is_ablate) {
            runs = train::run_preset(train::Preset::Ablate3a);
        } else {
            runs.push_back({cfg.preset.empty() ? std::string("custom") : cfg.preset, train::train(cfg.train)});
        }

        nlohmann::json summary;
        summary["schema_version"] = 1;
        summary["preset"] = cfg.preset;
        if (!is_ablate) summary["config"] = detail::train_config_to_json(cfg.train);

        if (runs.size() == 1) {
            auto out = detail::open_out(dir / "metrics.csv");
            write_metrics_csv(out, runs[0].result.log);
            summary["final"] = metrics_to_json(runs[0].result.final_metrics());
            summary["final"]["loss_total"] = runs[0].result.log.steps.back().total;
            // flatten the headline number for quick consumption
            summary["inter_combined"] = runs[0].result.final_metrics().inter_combined;
        } else {
            auto out = detail::open_out(dir / "metrics.csv");
            out << "intra_loss/inter_loss,loss_total,intra_align_main,intra_uniform_main,intra_combined_main,"
                   "inter_align,inter_uniform,inter_combined\n";
            nlohmann::json grid = nlohmann::json::array();
            for (const auto& r : runs) {
                const metrics::SpaceMetrics& m = r.result.final_metrics();
                out << r.label << "," << fmt(r.result.log.steps.back().total) << "," << fmt(m.intra_align[0])
                    << "," << fmt(m.intra_uniform[0]) << "," << fmt(m.intra_combined[0]) << ","
                    << fmt(m.inter_align) << "," << fmt(m.inter_uniform) << "," << fmt(m.inter_combined)
                    << "\n";
                nlohmann::json row = metrics_to_json(m);
                row["label"] = r.label;
                row["loss_total"] = r.result.log.steps.back().total;
                grid.push_back(row);
            }
            summary["grid"] = grid;
        }
        detail::open_out(dir / "summary.json") << summary.dump(2) << "\n";
        enc::save_checkpoint((dir / "checkpoint.json").string(), runs.back().result.params);
        return kExitOk;
    } catch (const NumericalError& e) {
        log << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}

// gradcheck: finite-difference sweep over all losses and encoder paths
inline int cmd_gradcheck(std::uint64_t seed, std::vector<std::pair<std::size_t, std::size_t>> sizes,
                         std::ostream& out = std::cout) {
    if (sizes.empty()) sizes = {{2, 4}, {2, 8}, {3, 4}, {3, 8}, {4, 4}, {4, 8}};
    const auto rows = gradcheck::run_all(seed, sizes);
    bool ok = true;
    out << "op,instances,max_rel_err,status\n";
    for (const auto& r : rows) {
        ok = ok && r.pass();
        out << r.name << "," << r.instances << "," << fmt(r.max_err) << "," << (r.pass() ? "pass" : "FAIL")
            << "\n";
    }
    return ok ? kExitOk : kExitAssert;
}

// ---- benchmark -------------------------------------------------------------

struct BenchRow {
    std::size_t B = 0;
    double naive_s = 0.0;
    double fast_s = 0.0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    double naive_exponent = 0.0;
    double fast_exponent = 0.0;
    double speedup_last = 0.0; // naive/fast at the largest B
};

namespace detail {

inline double fitted_exponent(const std::vector<std::pair<double, double>>& log_points) {
    // least-squares slope in log-log space
    const double n = static_cast<double>(log_points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : log_points) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace detail

inline BenchResult run_bench(const std::vector<std::size_t>& batch_sizes, std::size_t d, std::size_t reps,
                             std::uint64_t seed = 11) {
    TRICL_CHECK(!batch_sizes.empty(), "bench: no batch sizes");
    for (std::size_t B : batch_sizes) TRICL_CHECK(B >= 2, "bench: B must be >= 2");
    TRICL_CHECK(reps >= 1, "bench: reps must be >= 1");
    using clock = std::chrono::steady_clock;
    Rng rng(seed);
    BenchResult res;
    NoGradGuard ng; // pure evaluation timing
    for (std::size_t B : batch_sizes) {
        std::vector<double> naive_times, fast_times;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            std::array<Tensor, 3> Z;
            for (auto& z : Z) {
                z = Tensor(Shape{2 * B, d});
                for (double& v : z.data()) v = rng.normal();
            }
            const auto t0 = clock::now();
            const geom::AreaSums naive = geom::triplet_area_sums_naive(Z[0], Z[1], Z[2]);
            const auto t1 = clock::now();
            const geom::AreaSums fast = geom::triplet_area_sums_fast(Z[0], Z[1], Z[2]);
            const auto t2 = clock::now();
            naive_times.push_back(std::chrono::duration<double>(t1 - t0).count());
            fast_times.push_back(std::chrono::duration<double>(t2 - t1).count());
            const double rel_pos = std::abs(naive.pos_mean.item() - fast.pos_mean.item()) /
                                   std::max(std::abs(naive.pos_mean.item()), 1e-12);
            const double rel_neg = std::abs(naive.neg_mean.item() - fast.neg_mean.item()) /
                                   std::max(std::abs(naive.neg_mean.item()), 1e-12);
            TRICL_CHECK(rel_pos <= 1e-9 && rel_neg <= 1e-9,
                        "bench: naive and fast paths disagree at B=" << B << " (rel " << rel_pos << ", "
                                                                     << rel_neg << ")");
        }
        auto median = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            return v[v.size() / 2];
        };
        res.rows.push_back({B, median(naive_times), median(fast_times)});
    }
    std::vector<std::pair<double, double>> ln, lf;
    for (const auto& r : res.rows) {
        ln.emplace_back(std::log(static_cast<double>(r.B)), std::log(r.naive_s));
        lf.emplace_back(std::log(static_cast<double>(r.B)), std::log(r.fast_s));
    }
    res.naive_exponent = detail::fitted_exponent(ln);
    res.fast_exponent = detail::fitted_exponent(lf);
    res.speedup_last = res.rows.back().naive_s / res.rows.back().fast_s;
    return res;
}

inline int cmd_bench(const std::vector<std::size_t>& batch_sizes, std::size_t d, std::size_t reps,
                     const std::string& out_dir, std::ostream& out = std::cout) {
    try {
        const BenchResult res = run_bench(batch_sizes, d, reps);
        const std::filesystem::path dir = detail::resolve_out_dir(out_dir);
        auto csv = detail::open_out(dir / "bench.csv");
        csv << "B,naive_median_s,fast_median_s\n";
        for (const auto& r : res.rows)
            csv << r.B << "," << fmt(r.naive_s) << "," << fmt(r.fast_s) << "\n";
        out << "naive exponent: " << fmt(res.naive_exponent) << "\n";
        out << "fast exponent:  " << fmt(res.fast_exponent) << "\n";
        out << "speedup at B=" << res.rows.back().B << ": " << fmt(res.speedup_last) << "x\n";
        return kExitOk;
    } catch (const Error& e) {
        out << "bench error: " << e.what() << "\n";
        return kExitAssert;
    }
}

// ---- table 1 ----------------------------------------------------------------

struct Table1Row {
    std::string setting;
    metrics::SpaceMetrics m;
};

inline std::vector<Table1Row> run_table1() {
    // the five loss settings, in the production table's row order
    const std::pair<const char*, train::Preset> spec[] = {
        {"intra/nt_xent", train::Preset::IntraOnly},     {"inter/nt_xent", train::Preset::InterNtXent},
        {"inter/ours", train::Preset::InterTriangular},  {"joint/nt_xent", train::Preset::JointNtXent},
        {"joint/ours", train::Preset::JointTriangular},
    };
    std::vector<Table1Row> rows;
    for (const auto& [name, preset] : spec)
        rows.push_back({name, train::train(train::preset_config(preset)).final_metrics()});
    return rows;
}

struct Table1Check {
    std::string name;
    bool pass = false;
};

inline std::vector<Table1Check> table1_checks(const std::vector<Table1Row>& rows) {
    auto at = [&](const std::string& name) -> const metrics::SpaceMetrics& {
        for (const auto& r : rows)
            if (r.setting == name) return r.m;
        throw Error("table1: missing row " + name);
    };
    const auto& intra = at("intra/nt_xent");
    const auto& inter_nt = at("inter/nt_xent");
    const auto& joint_nt = at("joint/nt_xent");
    const auto& joint_ours = at("joint/ours");
    std::vector<Table1Check> checks;
    checks.push_back({"rows == 5", rows.size() == 5});
    checks.push_back({"inter/nt_xent intra_align >= 0.95 (line collapse)", inter_nt.intra_align[0] >= 0.95});
    checks.push_back({"inter/nt_xent inter_align >= 0.95 (line collapse)", inter_nt.inter_align >= 0.95});
    checks.push_back({"intra/nt_xent |inter_align| <= 0.1", std::abs(intra.inter_align) <= 0.1});
    checks.push_back({"intra/nt_xent intra_combined >= 0.5", intra.intra_combined[0] >= 0.5});
    bool ours_max = true;
    for (const auto& r : rows)
        if (r.setting != "joint/ours") ours_max = ours_max && joint_ours.inter_combined > r.m.inter_combined;
    checks.push_back({"joint/ours has max inter_combined", ours_max});
    checks.push_back({"joint/ours inter_combined > joint/nt_xent",
                      joint_ours.inter_combined > joint_nt.inter_combined});
    checks.push_back({"joint/ours intra_uniform < joint/nt_xent",
                      joint_ours.intra_uniform[0] < joint_nt.intra_uniform[0]});
    return checks;
}

inline int cmd_table1(const std::string& out_dir, std::ostream& out = std::cout) {
    try {
        const std::vector<Table1Row> rows = run_table1();
        const std::filesystem::path dir = detail::resolve_out_dir(out_dir);
        auto csv = detail::open_out(dir / "table1.csv");
        csv << "loss_setting,intra_align,intra_uniform,intra_combined,inter_align,inter_uniform,inter_combined\n";
        for (const auto& r : rows)
            csv << r.setting << "," << fmt(r.m.intra_align[0]) << "," << fmt(r.m.intra_uniform[0]) << ","
                << fmt(r.m.intra_combined[0]) << "," << fmt(r.m.inter_align) << "," << fmt(r.m.inter_uniform)
                << "," << fmt(r.m.inter_combined) << "\n";
        bool all = true;
        for (const auto& c : table1_checks(rows)) {
            all = all && c.pass;
            out << (c.pass ? "[pass] " : "[FAIL] ") << c.name << "\n";
        }
        return all ? kExitOk : kExitAssert;
    } catch (const NumericalError& e) {
        out << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        out << "table1 error: " << e.what() << "\n";
        return kExitConfig;
    }
}

} // namespace tricl::cli
