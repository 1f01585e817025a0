// saw: dataset generation, training, evaluation, ranking and adaptation runs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "saw/adapter.hpp"
#include "saw/config.hpp"
#include "saw/dataset.hpp"
#include "saw/errors.hpp"
#include "saw/parallel.hpp"
#include "saw/random.hpp"
#include "saw/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;

    saw::RunConfig load() const {
        saw::RunConfig c = saw::load_run_config(config);
        if (seed) c.seed = *seed;
        if (threads) c.threads = *threads;
        return c;
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON run config (default: $SAW_CONFIG, else built-in defaults)");
    app->add_option("--seed", c.seed, "root seed, overrides the config");
    app->add_option("--threads", c.threads, "worker threads, 0 = all cores");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw saw::IoError("cannot create directory '" + dir + "'");
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

std::vector<saw::TaskSpec> read_tasks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw saw::IoError("cannot read tasks file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::vector<saw::TaskSpec> tasks;
    // Either one JSON array or one task object per line.
    try {
        const json j = json::parse(text);
        if (j.is_array()) {
            for (std::size_t i = 0; i < j.size(); ++i) {
                tasks.push_back(saw::task_from_json(j[i], path + "[" + std::to_string(i) + "]"));
            }
            return tasks;
        }
        if (j.is_object()) return {saw::task_from_json(j, path)};
    } catch (const json::parse_error&) {
    }
    std::istringstream lines(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        try {
            tasks.push_back(saw::task_from_json(json::parse(line), where));
        } catch (const json::parse_error& e) {
            throw saw::ParseError(where + ": " + e.what());
        }
    }
    return tasks;
}

saw::TaskSpec read_task(const std::string& arg) {
    if (fs::exists(arg)) {
        auto tasks = read_tasks(arg);
        if (tasks.size() != 1) throw saw::InputError("--task file must hold exactly one task");
        return tasks.front();
    }
    try {
        return saw::task_from_json(json::parse(arg), "--task");
    } catch (const json::parse_error& e) {
        throw saw::InputError("--task: not a file and not valid JSON: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Common& common, const std::string& out_dir, std::optional<int> horizon) {
    const saw::RunConfig cfg = common.load();
    const int h = horizon.value_or(cfg.saw.horizon_seconds);
    ensure_dir(out_dir);
    const saw::DatasetSplits splits = saw::build_splits(cfg, h);
    // The worker count does not affect the data, so it stays out of the manifest.
    json config = saw::to_json(cfg);
    config.erase("threads");
    json manifest{{"config", std::move(config)}, {"horizon_s", h}, {"files", json::object()}};
    const std::pair<const char*, const std::vector<saw::DatasetRecord>*> parts[] = {
        {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
    const saw::DatasetStats* raw[] = {&splits.train_raw, &splits.val_raw, &splits.test_raw};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto [name, records] = parts[i];
        const std::string file = (fs::path(out_dir) / (std::string(name) + ".jsonl")).string();
        saw::write_jsonl(file, *records);
        json stats = saw::to_json(saw::dataset_stats(*records, raw[i]->skipped_specs));
        stats["before_rebalance"] = saw::to_json(*raw[i]);
        saw::write_json_file((fs::path(out_dir) / (std::string(name) + ".stats.json")).string(), stats);
        manifest["files"][name] = {{"path", std::string(name) + ".jsonl"},
                                   {"hash", saw::file_hash(file)},
                                   {"count", records->size()},
                                   {"fall_fraction", stats["fall_fraction"]}};
    }
    saw::write_json_file((fs::path(out_dir) / "manifest.json").string(), manifest);
    print(manifest["files"]);
    return 0;
}

saw::TrainOptions train_options(const saw::RunConfig& cfg) {
    saw::TrainOptions opt = cfg.train;
    opt.seed = saw::derive_seed(cfg.seed, "train");
    return opt;
}

int cmd_train(const Common& common, const std::string& data_dir, const std::string& out,
              std::optional<std::string> variant) {
    saw::RunConfig cfg = common.load();
    if (variant) cfg.saw.variant = saw::variant_from_name(*variant);
    const auto train_set = saw::read_jsonl((fs::path(data_dir) / "train.jsonl").string());
    const auto val_set = saw::read_jsonl((fs::path(data_dir) / "val.jsonl").string());
    const saw::TrainResult result = saw::train(cfg.saw, train_set, val_set, train_options(cfg));
    saw::save_checkpoint(result.params, out);
    json log = saw::to_json(result);
    saw::write_json_file(out + ".log.json", log);
    print({{"checkpoint", out}, {"best_epoch", result.best_epoch},
           {"best_val_fall_accuracy", result.best_val_fall_accuracy}, {"epochs", result.log.size()}});
    return 0;
}

int cmd_eval(const Common& common, const std::optional<std::string>& ckpt, const std::string& data,
             const std::vector<std::string>& variant_grid, const std::vector<int>& horizon_grid,
             const std::optional<std::string>& out) {
    json report{{"columns", {"fall_accuracy", "a_qdd", "a_q", "a_qd", "a_p", "a_theta"}}, {"rows", json::array()}};
    if (variant_grid.empty() && horizon_grid.empty()) {
        if (!ckpt) throw saw::ConfigError("eval: --ckpt is required without a grid");
        const saw::SawParams params = saw::load_checkpoint(*ckpt);
        const auto records = saw::read_jsonl(data);
        if (!records.empty() && records.front().meta.horizon_s != params.config.horizon_seconds) {
            throw saw::ConfigError("eval: dataset horizon " + std::to_string(records.front().meta.horizon_s) +
                                   " s, checkpoint horizon " + std::to_string(params.config.horizon_seconds) + " s");
        }
        const saw::EvalMetrics m = saw::evaluate(params, records);
        report["rows"].push_back(saw::metrics_row(m, params.config.variant, params.config.horizon_seconds));
        report["dataset_hash"] = saw::file_hash(data);
    } else {
        saw::RunConfig cfg = common.load();
        if (ckpt) cfg.saw = saw::load_checkpoint(*ckpt).config;
        std::vector<saw::Variant> variants;
        for (const auto& v : variant_grid) variants.push_back(saw::variant_from_name(v));
        if (variants.empty()) variants.push_back(cfg.saw.variant);

        if (horizon_grid.empty()) {
            // Train every variant on the split files next to the evaluation file.
            const fs::path dir = fs::path(data).parent_path();
            const auto train_set = saw::read_jsonl((dir / "train.jsonl").string());
            const auto val_set = saw::read_jsonl((dir / "val.jsonl").string());
            const auto test_set = saw::read_jsonl(data);
            report["dataset_hash"] = saw::file_hash(data);
            for (saw::Variant v : variants) {
                saw::SawConfig sc = cfg.saw;
                sc.variant = v;
                const auto result = saw::train(sc, train_set, val_set, train_options(cfg));
                report["rows"].push_back(saw::metrics_row(saw::evaluate(result.params, test_set), v, sc.horizon_seconds));
            }
        } else {
            // Matched datasets: same specs and seeds, rebuilt at each horizon.
            json hashes = json::object();
            for (int h : horizon_grid) {
                if (h < 1 || h > 3) throw saw::ConfigError("--horizon-grid: horizons must be 1, 2 or 3");
                const saw::DatasetSplits splits = saw::build_splits(cfg, h);
                std::uint64_t digest = 0;
                for (const auto& r : splits.test) digest = saw::splitmix64(digest ^ saw::fnv1a64(saw::record_to_json(r).dump()));
                char buf[17];
                std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
                hashes[std::to_string(h)] = buf;
                for (saw::Variant v : variants) {
                    saw::SawConfig sc = saw::SawConfig::for_horizon(h);
                    sc.S = cfg.saw.S;
                    sc.d_model = cfg.saw.d_model;
                    sc.n_heads = cfg.saw.n_heads;
                    sc.n_self_layers = cfg.saw.n_self_layers;
                    sc.n_cross_layers = cfg.saw.n_cross_layers;
                    sc.mlp_hidden = cfg.saw.mlp_hidden;
                    sc.add_pe_to_reference = cfg.saw.add_pe_to_reference;
                    sc.variant = v;
                    const auto result = saw::train(sc, splits.train, splits.val, train_options(cfg));
                    report["rows"].push_back(saw::metrics_row(saw::evaluate(result.params, splits.test), v, h));
                }
            }
            report["dataset_hash"] = hashes;
        }
    }
    if (out) saw::write_json_file(*out, report);
    print(report);
    return 0;
}

int cmd_rank(const Common& common, const std::string& ckpt, const std::string& task_arg, std::size_t t,
             std::optional<std::size_t> n, const std::optional<std::string>& out_dir) {
    const saw::RunConfig cfg = common.load();
    const saw::SawParams params = saw::load_checkpoint(ckpt);
    const saw::TaskSpec task = read_task(task_arg);
    saw::GeneratorOptions gen;
    gen.joints = cfg.robot_model.S;
    const saw::MotionSequence ref = saw::generate_reference(task, gen);
    const auto To = static_cast<std::size_t>(params.config.T_o);
    const auto Tf = static_cast<std::size_t>(params.config.T_f);
    if (t < To || t + Tf > ref.size()) {
        throw saw::BoundsError("--t " + std::to_string(t) + " out of range [" + std::to_string(To) + ", " +
                               std::to_string(ref.size() >= Tf ? ref.size() - Tf : 0) + "]");
    }
    // Follow the unmodified reference up to frame t.
    auto root_vel = saw::root_velocities(ref);
    root_vel.resize(t);
    const auto head = saw::rollout(cfg.robot_model, saw::init_state(cfg.robot_model, ref.front()),
                                   saw::slice_window(ref, 0, t), root_vel);
    const saw::ObservationWindow obs(saw::slice_window(head.executed, t - To, To), To);
    const saw::ReferenceWindow incumbent(saw::slice_window(ref, t, Tf), Tf);
    saw::EditOptions eopt;
    eopt.rest_pose = saw::family_rest_pose(task.family, cfg.robot_model.S);
    const std::size_t count = n.value_or(cfg.adapter.n_candidates);
    std::vector<saw::ReferenceWindow> windows{incumbent};
    for (auto& c : saw::edit_candidates(ref[t], incumbent, count,
                                        saw::derive_seed(saw::derive_seed(cfg.seed, "rank"), "tick", t), eopt)) {
        windows.push_back(std::move(c));
    }
    const auto scores = saw::saw_scorer(params)(head.final_state, obs, windows);
    const auto order = saw::rank_candidates(scores, cfg.adapter.rank_weights, params.target_norm);
    if (out_dir) ensure_dir(*out_dir);
    json rows = json::array();
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t i = order[rank];
        json row{{"rank", rank},
                 {"candidate", i},
                 {"incumbent", i == 0},
                 {"scalar", saw::scalarize(scores[i], cfg.adapter.rank_weights, params.target_norm)},
                 {"predicted", saw::to_json(scores[i])}};
        if (out_dir) {
            const std::string file = (fs::path(*out_dir) / ("candidate_" + std::to_string(i) + ".json")).string();
            saw::write_json_file(file, saw::sequence_to_json(windows[i].states()));
            row["sequence_file"] = file;
        }
        rows.push_back(std::move(row));
    }
    print({{"t", t}, {"candidates", std::move(rows)}});
    return 0;
}

int cmd_adapt(const Common& common, const std::optional<std::string>& ckpt, const std::string& tasks_file,
              bool baseline_only, bool oracle, const std::optional<std::string>& out_dir) {
    saw::RunConfig cfg = common.load();
    cfg.adapter.seed = saw::derive_seed(cfg.seed, "adapt");
    const auto tasks = read_tasks(tasks_file);
    if (tasks.empty()) throw saw::InputError("adapt: tasks file is empty");
    std::optional<saw::SawParams> params;
    if (!baseline_only && !oracle && !ckpt) {
        throw saw::ConfigError("adapt: --ckpt is required unless --baseline-only or --oracle");
    }
    if (!baseline_only && ckpt) {
        params = saw::load_checkpoint(*ckpt);
        cfg.adapter.horizon_s = params->config.horizon_seconds;
    }
    saw::GeneratorOptions gen;
    gen.joints = cfg.robot_model.S;
    // The oracle still ranks with the checkpoint's target statistics when one is given.
    const saw::Scorer scorer = oracle ? saw::oracle_scorer(cfg.robot_model) : saw::Scorer{};
    const saw::NormStats norm = params ? params->target_norm : saw::NormStats{};

    std::vector<std::optional<saw::AdaptTrace>> base(tasks.size()), adapted(tasks.size());
    saw::parallel_for(tasks.size(), cfg.threads, [&](std::size_t i) {
        base[i] = saw::baseline_rollout(tasks[i], cfg.robot_model, gen);
        if (params && !oracle) {
            adapted[i] = saw::adapt_rollout(tasks[i], *params, cfg.robot_model, cfg.adapter, gen);
        } else if (!baseline_only) {
            adapted[i] = saw::adapt_rollout(tasks[i], scorer, norm, cfg.robot_model, cfg.adapter, gen);
        }
    });

    std::vector<saw::AdaptTrace> baseline;
    for (auto& b : base) baseline.push_back(std::move(*b));
    json report;
    if (baseline_only) {
        std::size_t falls = 0;
        for (const auto& b : baseline) falls += b.fall ? 1 : 0;
        report = json{{"tasks", tasks.size()}, {"baseline_falls", falls}};
    } else {
        report = saw::to_json(saw::summarize(baseline, adapted));
        report["scorer"] = oracle ? "oracle" : "saw";
    }
    if (out_dir) {
        ensure_dir(*out_dir);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            json trace{{"task", saw::to_json(tasks[i])}, {"baseline", saw::to_json(baseline[i])}};
            if (adapted[i]) trace["adapted"] = saw::to_json(*adapted[i]);
            char name[32];
            std::snprintf(name, sizeof name, "trace_%05zu.json", i);
            saw::write_json_file((fs::path(*out_dir) / name).string(), trace);
        }
        saw::write_json_file((fs::path(*out_dir) / "report.json").string(), report);
    }
    print(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-aware motion scoring and adaptation"};
    app.require_subcommand(1);
    Common common;

    auto* gen = app.add_subcommand("gen-data", "build train/val/test JSONL datasets");
    std::string gen_out;
    std::optional<int> gen_horizon;
    add_common(gen, common);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--horizon", gen_horizon, "horizon in seconds, overrides saw.horizon_seconds");

    auto* tr = app.add_subcommand("train", "train a model on a generated dataset");
    std::string tr_data, tr_out;
    std::optional<std::string> tr_variant;
    add_common(tr, common);
    tr->add_option("--data", tr_data, "dataset directory with train.jsonl and val.jsonl")->required();
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--variant", tr_variant, "architecture variant, overrides saw.variant");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint, or train and evaluate a grid");
    std::optional<std::string> ev_ckpt, ev_out;
    std::string ev_data;
    std::vector<std::string> ev_variants;
    std::vector<int> ev_horizons;
    add_common(ev, common);
    ev->add_option("--ckpt", ev_ckpt, "checkpoint");
    ev->add_option("--data", ev_data, "evaluation JSONL file")->required();
    ev->add_option("--variant-grid", ev_variants, "variants to train and evaluate")->delimiter(',');
    ev->add_option("--horizon-grid", ev_horizons, "horizons (s) to rebuild, train and evaluate")->delimiter(',');
    ev->add_option("--out", ev_out, "also write the report here");

    auto* rk = app.add_subcommand("rank", "score and rank candidate edits at one frame");
    std::string rk_ckpt, rk_task;
    std::size_t rk_t = 0;
    std::optional<std::size_t> rk_n;
    std::optional<std::string> rk_out;
    add_common(rk, common);
    rk->add_option("--ckpt", rk_ckpt, "checkpoint")->required();
    rk->add_option("--task", rk_task, "task spec: JSON file or inline JSON")->required();
    rk->add_option("--t", rk_t, "frame index")->required();
    rk->add_option("--n", rk_n, "number of candidates (default adapter.n_candidates)");
    rk->add_option("--out-dir", rk_out, "write each candidate sequence here");

    auto* ad = app.add_subcommand("adapt", "run baseline and adaptive rollouts over a task list");
    std::optional<std::string> ad_ckpt, ad_out;
    std::string ad_tasks;
    bool ad_baseline = false, ad_oracle = false;
    add_common(ad, common);
    ad->add_option("--ckpt", ad_ckpt, "checkpoint");
    ad->add_option("--tasks", ad_tasks, "tasks: JSON array or one task per line")->required();
    ad->add_flag("--baseline-only", ad_baseline, "skip adaptation");
    ad->add_flag("--oracle", ad_oracle, "score candidates by simulating them instead of with the model");
    ad->add_option("--out", ad_out, "directory for traces and report.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(saw::ExitCode::kConfig);
    }

    try {
        if (gen->parsed()) return cmd_gen_data(common, gen_out, gen_horizon);
        if (tr->parsed()) return cmd_train(common, tr_data, tr_out, tr_variant);
        if (ev->parsed()) return cmd_eval(common, ev_ckpt, ev_data, ev_variants, ev_horizons, ev_out);
        if (rk->parsed()) return cmd_rank(common, rk_ckpt, rk_task, rk_t, rk_n, rk_out);
        if (ad->parsed()) return cmd_adapt(common, ad_ckpt, ad_tasks, ad_baseline, ad_oracle, ad_out);
    } catch (const saw::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(saw::ExitCode::kIo);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(saw::ExitCode::kConfig);
    }
    return 0;
}
