// Acceptance run: one PASS/FAIL line per criterion, with the measured numbers.
//
//   saw_acceptance [--only 1,2,...] [--seed N] [--cli path/to/saw] [--work DIR] [--ckpt FILE]
//
// Criteria 4-7 share one dataset and one trained full model; --ckpt loads a
// previously trained model instead (4 is then not re-measured).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grad_cases.hpp"
#include "helpers.hpp"
#include "saw/adapter.hpp"
#include "saw/config.hpp"
#include "saw/dataset.hpp"
#include "saw/model.hpp"
#include "saw/motion_gen.hpp"
#include "saw/random.hpp"
#include "saw/scoring.hpp"
#include "saw/sim.hpp"
#include "saw/train.hpp"

namespace fs = std::filesystem;
using namespace saw;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

struct Result {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::vector<Result> g_results;

void report(int id, const std::string& title, bool pass, const std::string& detail, double secs) {
    g_results.push_back({id, title, pass, detail, secs});
    std::printf("[%s] %d %s: %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
}

void note(const std::string& s) {
    std::printf("       %s\n", s.c_str());
    std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Shared study: dataset, capped test split and trained full model at 1 s.

constexpr std::size_t kTestCap = 1000;

RunConfig study_config(std::uint64_t seed) {
    RunConfig c;
    c.seed = seed;
    c.dataset.n_specs = 1300;
    c.dataset.split = {0.72, 0.10, 0.18};
    c.saw.d_model = 32;
    c.saw.mlp_hidden = 64;
    c.train.adam.lr = 1e-3;
    c.train.max_epochs = 20;
    c.train.patience = 6;
    c.adapter.seed = derive_seed(seed, "adapt");
    return c;
}

/// First cap/2 falls and cap/2 non-falls, order preserved. Shorter if a class runs out.
std::vector<DatasetRecord> cap_balanced(const std::vector<DatasetRecord>& records, std::size_t cap) {
    std::size_t falls = 0, stands = 0;
    std::vector<DatasetRecord> out;
    for (const auto& r : records) {
        std::size_t& n = r.target.fall > 0.5 ? falls : stands;
        if (n < cap / 2) {
            ++n;
            out.push_back(r);
        }
    }
    return out;
}

std::size_t count_falls(const std::vector<DatasetRecord>& records) {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.target.fall > 0.5; }));
}

SawConfig model_config(const RunConfig& cfg, Variant v, int horizon_s) {
    SawConfig sc = SawConfig::for_horizon(horizon_s);
    sc.S = cfg.saw.S;
    sc.d_model = cfg.saw.d_model;
    sc.n_heads = cfg.saw.n_heads;
    sc.n_self_layers = cfg.saw.n_self_layers;
    sc.n_cross_layers = cfg.saw.n_cross_layers;
    sc.mlp_hidden = cfg.saw.mlp_hidden;
    sc.add_pe_to_reference = cfg.saw.add_pe_to_reference;
    sc.variant = v;
    return sc;
}

struct Trained {
    SawParams params;
    EvalMetrics test;
    int epochs = 0;
    double seconds = 0.0;
};

Trained train_and_eval(const RunConfig& cfg, const DatasetSplits& splits, const std::vector<DatasetRecord>& test,
                       Variant v, int horizon_s) {
    const auto t0 = Clock::now();
    TrainOptions opt = cfg.train;
    opt.seed = derive_seed(cfg.seed, "train");
    TrainResult r = train(model_config(cfg, v, horizon_s), splits.train, splits.val, opt);
    Trained out;
    out.params = std::move(r.params);
    out.epochs = static_cast<int>(r.log.size());
    out.seconds = seconds_since(t0);
    out.test = evaluate(out.params, test);
    return out;
}

struct Study {
    RunConfig cfg;
    DatasetSplits splits;
    std::vector<DatasetRecord> test;
    double build_seconds = 0.0;
    std::optional<Trained> full;
    bool loaded = false;  // full model came from --ckpt
};

// ---------------------------------------------------------------------------
// 1. Gradient integrity

void criterion_grad(std::uint64_t seed) {
    const auto t0 = Clock::now();
    const auto ops = testing::op_grad_cases(derive_seed(seed, "grad-ops"), 12);
    testing::GradCase worst_op;
    std::set<std::string> op_names;
    for (const auto& c : ops) {
        op_names.insert(c.name);
        if (c.error >= worst_op.error) worst_op = c;
    }
    testing::GradCase worst_model;
    int model_checks = 0;
    for (Variant v : kAllVariants) {
        for (std::uint64_t k = 0; k < 3; ++k) {
            const auto c = testing::model_grad_case(v, derive_seed(seed, "grad-model", k));
            ++model_checks;
            if (c.error >= worst_model.error) worst_model = c;
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = worst_op.error < 1e-4 && worst_model.error < 1e-4 && secs < 120.0;
    report(1, "gradient integrity", pass,
           fmt("%zu op cases over %zu op/input pairs, max rel err %.2e (%s); %d tiny-model checks over all "
               "weights of all variants, max %.2e (%s); limit 1e-4 within 120 s",
               ops.size(), op_names.size(), worst_op.error, worst_op.name.c_str(), model_checks, worst_model.error,
               worst_model.name.c_str()),
           secs);
}

// ---------------------------------------------------------------------------
// 2. Scoring oracle equivalence

void criterion_scoring(std::uint64_t seed) {
    const auto t0 = Clock::now();
    Rng rng(derive_seed(seed, "scoring"));
    double worst = 0.0, worst_abs_small = 0.0;
    std::string worst_field = "-";
    for (int i = 0; i < 1000; ++i) {
        const std::size_t T = 3 + rng.below(98);
        const std::size_t S = 1 + rng.below(30);
        const double dt = rng.uniform(0.005, 0.1);
        const MotionSequence ref = testing::random_sequence(rng, T, S, dt);
        MotionSequence exe = testing::random_sequence(rng, T, S, dt);
        if (i % 2 == 0) {
            // Near-tracking pairs: small perturbations of the reference.
            std::vector<RobotState> frames = ref.frames();
            for (auto& f : frames) {
                for (double& q : f.joint_pos) q += 0.01 * rng.normal();
                for (double& q : f.joint_vel) q += 0.1 * rng.normal();
                for (double& p : f.root_pos) p += 0.01 * rng.normal();
            }
            exe = MotionSequence(std::move(frames), dt);
        }
        const bool fall = rng.below(2) == 1;
        const ScoreVector got = compute_scores(ref, exe, fall);
        const ScoreVector want = testing::brute_force_scores(ref, exe, fall);
        const auto g = got.regression(), w = want.regression();
        for (std::size_t k = 0; k <= g.size(); ++k) {
            const double a = k == g.size() ? got.fall : g[k];
            const double b = k == g.size() ? want.fall : w[k];
            const double err = std::abs(a - b) / std::max(1.0, std::abs(b));
            if (std::abs(b) <= 1.0) worst_abs_small = std::max(worst_abs_small, std::abs(a - b));
            if (err > worst) {
                worst = err;
                worst_field = k == g.size() ? "fall" : kRegressionNames[k];
            }
        }
    }
    const double secs = seconds_since(t0);
    report(2, "scoring oracle equivalence", worst < 1e-10 && secs < 60.0,
           fmt("1000 random pairs, max |got - naive| / max(1, |naive|) = %.2e (%s), max abs diff on values <= 1: "
               "%.2e; limit 1e-10 within 60 s",
               worst, worst_field.c_str(), worst_abs_small),
           secs);
}

// ---------------------------------------------------------------------------
// 3. Simulator calibration

bool falls(const RobotModel& robot, const TaskSpec& spec, std::uint64_t jitter) {
    const MotionSequence ref = generate_reference(spec);
    return rollout(robot, init_state(robot, ref.front(), jitter), ref).fall;
}

void criterion_calibration(std::uint64_t seed) {
    const auto t0 = Clock::now();
    const RobotModel robot = RobotModel::defaults();
    const auto specs = sample_specs(2000, derive_seed(seed, "calibration"));
    std::size_t fell = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) fell += falls(robot, specs[i], derive_seed(seed, "jitter", i)) ? 1 : 0;
    const double fraction = static_cast<double>(fell) / static_cast<double>(specs.size());

    // Per family: 9 difficulty bins centred on 0.1 .. 0.9, 120 rollouts each.
    constexpr int kBins = 9, kPerBin = 120;
    Rng rng(derive_seed(seed, "calibration-bins"));
    bool monotone = true;
    int total_inversions = 0;
    for (Family f : kAllFamilies) {
        std::vector<double> rate(kBins);
        for (int b = 0; b < kBins; ++b) {
            const double centre = 0.1 * (b + 1);
            int n_fall = 0;
            for (int k = 0; k < kPerBin; ++k) {
                TaskSpec s;
                s.family = f;
                s.difficulty = std::clamp(centre + rng.uniform(-0.05, 0.05), 0.0, 1.0);
                s.duration_s = rng.uniform(3.0, 12.0);
                s.seed = rng.next_u64();
                n_fall += falls(robot, s, rng.next_u64()) ? 1 : 0;
            }
            rate[b] = static_cast<double>(n_fall) / kPerBin;
        }
        int inversions = 0;
        double worst_drop = 0.0;
        std::string row;
        for (int b = 0; b < kBins; ++b) {
            row += fmt(" %.2f", rate[b]);
            if (b > 0 && rate[b] < rate[b - 1]) {
                ++inversions;
                worst_drop = std::max(worst_drop, rate[b - 1] - rate[b]);
            }
        }
        total_inversions += inversions;
        const bool ok = inversions <= 1 && worst_drop <= 0.02 + 1e-12;
        monotone = monotone && ok;
        note(fmt("%-6s fall rate by bin:%s  inversions %d%s", std::string(family_name(f)).c_str(), row.c_str(),
                 inversions, ok ? "" : "  <- not monotone"));
    }
    const double secs = seconds_since(t0);
    report(3, "simulator calibration", fraction >= 0.3 && fraction <= 0.7 && monotone && secs < 300.0,
           fmt("fall fraction %.3f over 2000 rollouts (want [0.3, 0.7]); per-family rates over 9 bins x %d "
               "rollouts %s (%d inversions in total, at most 1 of <= 2 pts allowed per family); limit 300 s",
               fraction, kPerBin, monotone ? "monotone" : "NOT monotone", total_inversions),
           secs);
}

// ---------------------------------------------------------------------------
// 4. Fall prediction

void build_study(Study& st) {
    if (!st.splits.train.empty()) return;
    const auto t0 = Clock::now();
    st.splits = build_splits(st.cfg, 1);
    st.test = cap_balanced(st.splits.test, kTestCap);
    st.build_seconds = seconds_since(t0);
}

void ensure_full(Study& st) {
    build_study(st);
    if (!st.full) st.full = train_and_eval(st.cfg, st.splits, st.test, Variant::kFull, 1);
}

void criterion_fall_prediction(Study& st) {
    const auto t0 = Clock::now();
    ensure_full(st);
    const double secs = st.loaded ? st.build_seconds : seconds_since(t0);
    const Trained& m = *st.full;
    const std::size_t test_falls = count_falls(st.test);
    const bool balanced = st.test.size() == kTestCap && 2 * test_falls == st.test.size();
    const bool pass = !st.loaded && st.splits.train.size() >= 8000 && balanced && m.test.fall_accuracy >= 0.90 &&
                      secs <= 1800.0;
    report(4, "fall prediction", pass,
           fmt("full SAW (d_model %d, 1 s) trained on %zu records in %d epochs: test fall accuracy %.2f%% on %zu "
               "records (%zu falls); want >= 8000 train records, balanced 1000-record test, >= 90%% within 1800 s "
               "(data %.1f s + training %.1f s)%s",
               m.params.config.d_model, st.splits.train.size(), m.epochs, 100.0 * m.test.fall_accuracy,
               st.test.size(), test_falls, st.build_seconds, m.seconds,
               st.loaded ? "; model loaded from --ckpt, not re-measured" : ""),
           secs);
}

// ---------------------------------------------------------------------------
// 5. Ablation structure

void criterion_ablation(Study& st) {
    const auto t0 = Clock::now();
    ensure_full(st);
    const EvalMetrics& full = st.full->test;
    double best_ablation = 0.0, no_ref_aq = 0.0;
    note(fmt("%-13s accuracy %6.2f%%  a_q mse %.5f", "full", 100.0 * full.fall_accuracy, full.mse[0]));
    for (Variant v : kAllVariants) {
        if (v == Variant::kFull) continue;
        const Trained t = train_and_eval(st.cfg, st.splits, st.test, v, 1);
        best_ablation = std::max(best_ablation, t.test.fall_accuracy);
        if (v == Variant::kNoRef) no_ref_aq = t.test.mse[0];
        note(fmt("%-13s accuracy %6.2f%%  a_q mse %.5f  (%d epochs, %.0f s)", std::string(variant_name(v)).c_str(),
                 100.0 * t.test.fall_accuracy, t.test.mse[0], t.epochs, t.seconds));
    }
    const bool aq_ok = full.mse[0] <= no_ref_aq;
    const bool acc_ok = full.fall_accuracy >= best_ablation - 0.02;
    report(5, "ablation structure", aq_ok && acc_ok,
           fmt("a_q mse full %.5f vs no_ref %.5f (want full <= no_ref); accuracy full %.2f%% vs best ablation "
               "%.2f%% (want >= best - 2 pts)",
               full.mse[0], no_ref_aq, 100.0 * full.fall_accuracy, 100.0 * best_ablation),
           seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 6. Horizon robustness

void criterion_horizons(Study& st) {
    const auto t0 = Clock::now();
    ensure_full(st);
    const double base = st.full->test.fall_accuracy;
    bool pass = true;
    std::string detail = fmt("1 s %.2f%%", 100.0 * base);
    for (int h : {2, 3}) {
        const DatasetSplits splits = build_splits(st.cfg, h);
        const auto test = cap_balanced(splits.test, kTestCap);
        const Trained t = train_and_eval(st.cfg, splits, test, Variant::kFull, h);
        const double gap = std::abs(t.test.fall_accuracy - base);
        pass = pass && gap <= 0.05;
        detail += fmt("; %d s %.2f%% (gap %.2f pts, %zu train / %zu test records)", h, 100.0 * t.test.fall_accuracy,
                      100.0 * gap, splits.train.size(), test.size());
        note(fmt("horizon %d s: %d epochs, %.0f s", h, t.epochs, t.seconds));
    }
    report(6, "horizon robustness", pass, detail + "; want each gap <= 5 pts", seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 7. Fall prevention

std::vector<TaskSpec> falling_tasks(std::uint64_t seed, std::size_t n, const RobotModel& robot) {
    std::vector<TaskSpec> out;
    std::size_t batch = 0;
    while (out.size() < n) {
        for (const auto& s : sample_specs(1000, derive_seed(seed, "prevention", batch++))) {
            if (out.size() < n && baseline_rollout(s, robot).fall) out.push_back(s);
        }
    }
    return out;
}

void criterion_prevention(Study& st) {
    ensure_full(st);
    const RobotModel robot = st.cfg.robot_model;
    const auto tasks = falling_tasks(st.cfg.seed, 200, robot);
    const SawParams& model = st.full->params;

    auto t0 = Clock::now();
    const auto learned =
        fall_prevention_report(tasks, saw_scorer(model), model.target_norm, robot, st.cfg.adapter, 1);
    const double learned_secs = seconds_since(t0);
    t0 = Clock::now();
    const auto oracle =
        fall_prevention_report(tasks, oracle_scorer(robot), model.target_norm, robot, st.cfg.adapter, 1);
    const double oracle_secs = seconds_since(t0);

    const bool pass = learned.baseline_falls == 200 && learned.prevented_fraction >= 0.40 &&
                      learned.mean_root_rmse <= 0.5 && oracle.prevented_fraction >= learned.prevented_fraction - 0.05 &&
                      learned_secs <= 1200.0;
    report(7, "fall prevention", pass,
           fmt("%zu baseline-falling tasks: learned scorer prevents %.1f%% (want >= 40%%) with mean root-path RMSE "
               "%.3f m (want <= 0.5) in %.0f s (limit 1200 s); oracle prevents %.1f%% (want >= learned - 5 pts, "
               "%.0f s)",
               learned.baseline_falls, 100.0 * learned.prevented_fraction, learned.mean_root_rmse, learned_secs,
               100.0 * oracle.prevented_fraction, oracle_secs),
           learned_secs + oracle_secs);
}

// ---------------------------------------------------------------------------
// 8. Determinism through the command-line tool

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[fs::relative(e.path(), root).string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return files;
}

void criterion_determinism(std::uint64_t seed, const std::string& cli, const fs::path& work) {
    const auto t0 = Clock::now();
    if (cli.empty() || !fs::exists(cli)) {
        report(8, "determinism", false, "saw binary not found (pass --cli)", 0.0);
        return;
    }
    const fs::path dir = work / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        RunConfig c;
        c.seed = seed;
        c.saw.d_model = 8;
        c.saw.n_heads = 2;
        c.saw.n_self_layers = 1;
        c.saw.mlp_hidden = 16;
        c.dataset.n_specs = 40;
        c.train.max_epochs = 2;
        c.train.batch_size = 32;
        c.adapter.n_candidates = 5;
        write_json_file((dir / "config.json").string(), to_json(c));
        std::ofstream tasks(dir / "tasks.jsonl");
        for (auto s : sample_specs(6, derive_seed(seed, "determinism-tasks"), {0.5, 1.0, 3.0, 6.0})) {
            tasks << to_json(s).dump() << "\n";
        }
    }
    const std::string cfg = " --config " + (dir / "config.json").string();
    const std::string tasks = (dir / "tasks.jsonl").string();
    std::string failed;
    // Run A with one worker, run B with three; every output file must match byte for byte.
    for (const auto& [run, threads] : {std::pair{"A", 1}, std::pair{"B", 3}}) {
        const fs::path out = dir / run;
        const std::string common = cfg + " --threads " + std::to_string(threads);
        const std::string ckpt = (out / "model.ckpt").string();
        const std::string steps[] = {
            cli + " gen-data" + common + " --out " + (out / "data").string(),
            cli + " train" + common + " --data " + (out / "data").string() + " --out " + ckpt,
            cli + " eval" + common + " --ckpt " + ckpt + " --data " + (out / "data" / "test.jsonl").string() +
                " --out " + (out / "eval.json").string(),
            cli + " adapt" + common + " --ckpt " + ckpt + " --tasks " + tasks + " --out " + (out / "adapt").string(),
        };
        for (const auto& cmd : steps) {
            if (std::system((cmd + " > /dev/null 2>&1").c_str()) != 0 && failed.empty()) failed = cmd;
        }
    }
    if (!failed.empty()) {
        report(8, "determinism", false, "command failed: " + failed, seconds_since(t0));
        return;
    }
    const auto a = read_tree(dir / "A"), b = read_tree(dir / "B");
    std::vector<std::string> differing;
    for (const auto& [name, bytes] : a) {
        auto it = b.find(name);
        if (it == b.end() || it->second != bytes) differing.push_back(name);
    }
    for (const auto& [name, _] : b)
        if (!a.count(name)) differing.push_back(name);
    std::size_t groups[4] = {0, 0, 0, 0};  // data, train, eval, adapt
    for (const auto& [name, _] : a) {
        if (name.rfind("data/", 0) == 0) ++groups[0];
        else if (name.rfind("model.ckpt", 0) == 0) ++groups[1];
        else if (name == "eval.json") ++groups[2];
        else if (name.rfind("adapt/", 0) == 0) ++groups[3];
    }
    const bool all_present = groups[0] >= 4 && groups[1] == 2 && groups[2] == 1 && groups[3] >= 2;
    report(8, "determinism", differing.empty() && all_present,
           fmt("same seed, --threads 1 vs 3: gen-data %zu files, train %zu, eval %zu, adapt %zu; %zu differ%s",
               groups[0], groups[1], groups[2], groups[3], differing.size(),
               differing.empty() ? "" : (" (first: " + differing.front() + ")").c_str()),
           seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 9. Property suite

struct Property {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
};

bool same_bits(const Quat& a, const Quat& b) { return std::memcmp(&a, &b, sizeof(Quat)) == 0; }

Property prop_quaternion(Rng& rng) {
    Property p{"quaternion canonicalization idempotent and sign invariant"};
    for (int i = 0; i < 20000; ++i) {
        const double scale = std::pow(10.0, rng.uniform(-3, 3));
        Quat q{scale * rng.normal(), scale * rng.normal(), scale * rng.normal(), scale * rng.normal()};
        if (i % 5 == 0) q.w = 0.0;
        if (i % 7 == 0) q.x = 0.0;
        const Quat f = quat_canonicalize(q);
        const bool ok = same_bits(quat_canonicalize(f), f) && same_bits(quat_canonicalize({-q.w, -q.x, -q.y, -q.z}), f);
        ++p.cases;
        p.failures += ok ? 0 : 1;
    }
    return p;
}

Property prop_absorbing_fall(Rng& rng) {
    Property p{"fall is absorbing"};
    const RobotModel robot = RobotModel::defaults();
    SpecSampling hard;
    hard.difficulty_lo = 0.7;
    const auto specs = sample_specs(150, rng.next_u64(), hard);
    for (const auto& spec : specs) {
        const MotionSequence ref = generate_reference(spec);
        const RolloutResult r = rollout(robot, init_state(robot, ref.front(), rng.next_u64()), ref);
        if (!r.fall) continue;
        ++p.cases;
        bool ok = r.final_state.fallen;
        const RobotState& at_fall = r.executed[*r.fall_frame];
        for (std::size_t t = *r.fall_frame; t < r.executed.size(); ++t) ok = ok && r.executed[t] == at_fall;
        // Keep stepping with arbitrary commands: nothing but the frame counter moves.
        SimState s = r.final_state;
        for (int k = 0; k < 50; ++k) {
            const SimState next = step(robot, s, testing::random_state(rng, robot.S, 2.0),
                                       {rng.uniform(-2, 2), rng.uniform(-2, 2)}, ref.dt());
            ok = ok && next.fallen && next.robot == s.robot && next.fall_frame == s.fall_frame &&
                 next.frame == s.frame + 1;
            s = next;
        }
        p.failures += ok ? 0 : 1;
    }
    return p;
}

Property prop_anchoring(Rng& rng) {
    Property p{"edited candidates start exactly at the current state"};
    for (int i = 0; i < 300; ++i) {
        TaskSpec spec;
        spec.family = kAllFamilies[rng.below(6)];
        spec.difficulty = rng.uniform();
        spec.duration_s = 4.0;
        spec.seed = rng.next_u64();
        const MotionSequence ref = generate_reference(spec);
        const std::size_t Tf = 50;
        const std::size_t t = rng.below(ref.size() - Tf);
        RobotState current = ref[t];
        for (double& q : current.joint_pos) q += rng.uniform(-0.3, 0.3);
        for (double& q : current.joint_vel) q += rng.uniform(-1, 1);
        EditOptions opt;
        opt.rest_pose = family_rest_pose(spec.family, kDefaultJoints);
        const auto cands = edit_candidates(current, ReferenceWindow(slice_window(ref, t, Tf), Tf), 8, rng.next_u64(), opt);
        for (const auto& c : cands) {
            ++p.cases;
            p.failures += c.states()[0] == current ? 0 : 1;
        }
    }
    return p;
}

std::vector<ScoreVector> random_scores(Rng& rng, std::size_t n) {
    std::vector<ScoreVector> s(n);
    for (auto& v : s) {
        v.fall = rng.uniform();
        v.set_regression({rng.uniform(0, 1), rng.uniform(0, 10), rng.uniform(0, 1e3), rng.uniform(0, 0.5), rng.uniform(0, 0.2)});
    }
    return s;
}

NormStats random_norm(Rng& rng) {
    NormStats n;
    for (std::size_t i = 0; i < 5; ++i) {
        n.mean[i] = rng.uniform(0, 1);
        n.std[i] = rng.uniform(0.1, 10);
    }
    return n;
}

Property prop_gate(Rng& rng) {
    Property p{"gate dominance"};
    for (int i = 0; i < 2000; ++i) {
        const auto scores = random_scores(rng, 2 + rng.below(20));
        const RankWeights w;
        const NormStats norm = random_norm(rng);
        const auto order = rank_candidates(scores, w, norm);
        bool seen_gated = false, ok = true;
        for (std::size_t k : order) {
            const bool gated = scores[k].fall > w.fall_gate;
            ok = ok && !(seen_gated && !gated);
            seen_gated = seen_gated || gated;
        }
        for (const auto& a : scores)
            for (const auto& b : scores)
                if (a.fall <= w.fall_gate && b.fall > w.fall_gate) ok = ok && scalarize(a, w, norm) < scalarize(b, w, norm);
        ++p.cases;
        p.failures += ok ? 0 : 1;
    }
    return p;
}

Property prop_scale(Rng& rng) {
    Property p{"argmin invariant to positive weight scaling"};
    for (int i = 0; i < 2000; ++i) {
        const auto scores = random_scores(rng, 2 + rng.below(20));
        const NormStats norm = random_norm(rng);
        RankWeights w;
        for (double& x : w.w) x = rng.uniform(0, 5);
        RankWeights scaled = w;
        const double c = std::pow(10.0, rng.uniform(-3, 3));
        for (double& x : scaled.w) x *= c;
        ++p.cases;
        p.failures += rank_candidates(scores, w, norm).front() == rank_candidates(scores, scaled, norm).front() ? 0 : 1;
    }
    return p;
}

Property prop_batch_permutation(Rng& rng) {
    Property p{"batch-permutation equivariance"};
    for (Variant v : kAllVariants) {
        for (int trial = 0; trial < 8; ++trial) {
            const SawConfig c = testing::tiny(v);
            SawParams params = init_params(c, rng.next_u64());
            testing::randomize_stats(rng, params);
            const std::size_t n = 2 + rng.below(6);
            const auto pairs = testing::random_pairs(rng, c, n);
            std::vector<std::size_t> perm(n);
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            rng.shuffle(perm.begin(), perm.end());
            std::vector<const ObservationWindow*> po;
            std::vector<const ReferenceWindow*> pr;
            for (std::size_t i : perm) {
                po.push_back(&pairs.obs[i]);
                pr.push_back(&pairs.ref[i]);
            }
            const auto base = forward(params, pairs.obs_ptr(), pairs.ref_ptr());
            const auto permuted = forward(params, po, pr);
            bool ok = true;
            for (std::size_t k = 0; k < n; ++k) {
                const auto& a = permuted[k];
                const auto& b = base[perm[k]];
                ok = ok && std::abs(a.fall_logit - b.fall_logit) <= 1e-12;
                for (std::size_t j = 0; j < 5; ++j) ok = ok && std::abs(a.standardized[j] - b.standardized[j]) <= 1e-12;
            }
            ++p.cases;
            p.failures += ok ? 0 : 1;
        }
    }
    return p;
}

Property prop_reference_permutation(Rng& rng) {
    Property p{"reference-permutation invariance without reference positions"};
    for (Variant v : kAllVariants) {
        for (int trial = 0; trial < 8; ++trial) {
            const SawConfig c = testing::tiny(v, false);
            SawParams params = init_params(c, rng.next_u64());
            testing::randomize_stats(rng, params);
            const auto pairs = testing::random_pairs(rng, c, 1);
            std::vector<RobotState> frames = pairs.ref[0].states().frames();
            rng.shuffle(frames.begin(), frames.end());
            const ReferenceWindow shuffled(MotionSequence(frames, pairs.ref[0].states().dt()), c.T_f);
            const auto a = forward(params, pairs.obs[0], pairs.ref[0]);
            const auto b = forward(params, pairs.obs[0], shuffled);
            bool ok = std::abs(a.fall_logit - b.fall_logit) <= 1e-10;
            for (std::size_t j = 0; j < 5; ++j) ok = ok && std::abs(a.standardized[j] - b.standardized[j]) <= 1e-10;
            ++p.cases;
            p.failures += ok ? 0 : 1;
        }
    }
    return p;
}

Property prop_hysteresis(const std::string& label, const Scorer& scorer, const NormStats& norm,
                         const std::vector<TaskSpec>& tasks, const AdapterConfig& base_cfg) {
    Property p{"hysteresis monotone (" + label + ")"};
    const RobotModel robot = RobotModel::defaults();
    const double margins[] = {0.0, 0.02, 0.05, 0.1, 0.2, 0.5, std::numeric_limits<double>::infinity()};
    for (const auto& task : tasks) {
        std::size_t prev = std::numeric_limits<std::size_t>::max();
        bool ok = true;
        std::string counts;
        for (double m : margins) {
            AdapterConfig cfg = base_cfg;
            cfg.switch_margin = m;
            const std::size_t sw = adapt_rollout(task, scorer, norm, robot, cfg).switches;
            counts += " " + std::to_string(sw);
            ok = ok && sw <= prev;
            prev = sw;
        }
        ++p.cases;
        if (!ok) {
            ++p.failures;
            note(fmt("hysteresis (%s) violated on %s d=%.2f: switches%s", label.c_str(),
                     std::string(family_name(task.family)).c_str(), task.difficulty, counts.c_str()));
        }
    }
    return p;
}

void criterion_properties(std::uint64_t seed, Study& st, bool have_model) {
    const auto t0 = Clock::now();
    Rng rng(derive_seed(seed, "properties"));
    std::vector<Property> props;
    props.push_back(prop_quaternion(rng));
    props.push_back(prop_absorbing_fall(rng));
    props.push_back(prop_anchoring(rng));
    props.push_back(prop_gate(rng));
    props.push_back(prop_scale(rng));
    props.push_back(prop_batch_permutation(rng));
    props.push_back(prop_reference_permutation(rng));

    // Hysteresis on a mix of easy and hard tasks, with the oracle and (when trained) the learned model.
    const auto tasks = sample_specs(30, derive_seed(seed, "hysteresis-tasks"));
    const RobotModel robot = RobotModel::defaults();
    if (have_model) {
        const SawParams& m = st.full->params;
        props.push_back(prop_hysteresis("oracle", oracle_scorer(robot), m.target_norm, tasks, st.cfg.adapter));
        props.push_back(prop_hysteresis("learned", saw_scorer(m), m.target_norm, tasks, st.cfg.adapter));
    } else {
        std::vector<ScoreVector> targets;
        for (const auto& r : build_dataset(sample_specs(60, derive_seed(seed, "hysteresis-norm")), {}).records) {
            targets.push_back(r.target);
        }
        props.push_back(prop_hysteresis("oracle", oracle_scorer(robot), NormStats::fit(targets), tasks, st.cfg.adapter));
    }

    bool pass = true;
    std::size_t cases = 0;
    for (const auto& p : props) {
        note(fmt("%-62s %6zu cases, %zu failures", p.name.c_str(), p.cases, p.failures));
        pass = pass && p.failures == 0 && p.cases > 0;
        cases += p.cases;
    }
    report(9, "property suite", pass,
           fmt("%zu properties, %zu seeded cases%s", props.size(), cases,
               have_model ? "" : "; learned-model hysteresis skipped (no model in this run)"),
           seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance run"};
    std::vector<int> only;
    std::uint64_t seed = 20240607;
    std::string cli, work = "acceptance_work", ckpt, report_path;
    app.add_option("--only", only, "criteria to run, e.g. 1,2,3")->delimiter(',');
    app.add_option("--seed", seed, "root seed");
    app.add_option("--cli", cli, "path to the saw binary (criterion 8)");
    app.add_option("--work", work, "scratch directory");
    app.add_option("--ckpt", ckpt, "reuse a trained full 1 s model for 5-7 and 9");
    app.add_option("--report", report_path, "also write the results as JSON");
    CLI11_PARSE(app, argc, argv);

    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    fs::create_directories(work);
    const auto t0 = Clock::now();

    Study study;
    study.cfg = study_config(seed);
    if (!ckpt.empty()) {
        build_study(study);
        Trained t;
        t.params = load_checkpoint(ckpt);
        t.test = evaluate(t.params, study.test);
        study.full = std::move(t);
        study.loaded = true;
    }

    try {
        if (wanted(1)) criterion_grad(seed);
        if (wanted(2)) criterion_scoring(seed);
        if (wanted(3)) criterion_calibration(seed);
        if (wanted(4)) criterion_fall_prediction(study);
        if (wanted(4) && !study.loaded) save_checkpoint(study.full->params, (fs::path(work) / "full_1s.ckpt").string());
        if (wanted(5)) criterion_ablation(study);
        if (wanted(6)) criterion_horizons(study);
        if (wanted(7)) criterion_prevention(study);
        if (wanted(8)) criterion_determinism(seed, cli, work);
        if (wanted(9)) criterion_properties(seed, study, study.full.has_value());
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance run aborted: %s\n", e.what());
        return 1;
    }

    const auto passed = std::count_if(g_results.begin(), g_results.end(), [](const Result& r) { return r.pass; });
    std::printf("acceptance: %td/%zu criteria passed in %.0f s\n", passed, g_results.size(), seconds_since(t0));
    if (!report_path.empty()) {
        json rows = json::array();
        for (const auto& r : g_results) {
            rows.push_back({{"criterion", r.id}, {"title", r.title}, {"pass", r.pass}, {"detail", r.detail},
                            {"seconds", r.seconds}});
        }
        write_json_file(report_path, {{"seed", seed}, {"results", rows}});
    }
    return passed == static_cast<std::ptrdiff_t>(g_results.size()) ? 0 : 1;
}
