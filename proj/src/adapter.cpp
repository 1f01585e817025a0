#include "saw/adapter.hpp"

#include <cmath>
#include <limits>

#include "saw/errors.hpp"
#include "saw/parallel.hpp"
#include "saw/random.hpp"

namespace saw {

using nlohmann::json;

void AdapterConfig::validate() const {
    if (n_candidates < 1) throw ConfigError("adapter.n_candidates: must be >= 1");
    if (replan_every < 1) throw ConfigError("adapter.replan_every: must be >= 1");
    if (horizon_s < 1 || horizon_s > 3) throw ConfigError("adapter.horizon_s: must be 1, 2 or 3");
    if (!(switch_margin >= 0.0)) throw ConfigError("adapter.switch_margin: must be >= 0");
    if (!(observe_s > 0.0)) throw ConfigError("adapter.observe_s: must be > 0");
    rank_weights.validate();
}

json to_json(const AdapterConfig& c) {
    // JSON has no infinity; a null margin means "never switch".
    json margin = std::isfinite(c.switch_margin) ? json(c.switch_margin) : json(nullptr);
    return json{{"n_candidates", c.n_candidates}, {"replan_every", c.replan_every},
                {"horizon_s", c.horizon_s},       {"switch_margin", margin},
                {"rank_weights", to_json(c.rank_weights)}, {"seed", c.seed},
                {"observe_s", c.observe_s}};
}

AdapterConfig adapter_config_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected object");
    AdapterConfig c;
    auto count = [&](const char* key, auto& dst) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer() || j[key].get<long long>() < 0) {
            throw ConfigError(where + "." + key + ": expected non-negative integer");
        }
        dst = static_cast<std::remove_reference_t<decltype(dst)>>(j[key].get<long long>());
    };
    count("n_candidates", c.n_candidates);
    count("replan_every", c.replan_every);
    count("horizon_s", c.horizon_s);
    count("seed", c.seed);
    if (j.contains("switch_margin")) {
        const auto& m = j["switch_margin"];
        if (m.is_null()) {
            c.switch_margin = std::numeric_limits<double>::infinity();
        } else if (m.is_number()) {
            c.switch_margin = m.get<double>();
        } else {
            throw ConfigError(where + ".switch_margin: expected number or null");
        }
    }
    if (j.contains("observe_s")) {
        if (!j["observe_s"].is_number()) throw ConfigError(where + ".observe_s: expected number");
        c.observe_s = j["observe_s"].get<double>();
    }
    if (j.contains("rank_weights")) c.rank_weights = rank_weights_from_json(j["rank_weights"], where + ".rank_weights");
    c.validate();
    return c;
}

Scorer saw_scorer(const SawParams& params) {
    return [&params](const SimState&, const ObservationWindow& obs, const std::vector<ReferenceWindow>& refs) {
        std::vector<const ObservationWindow*> o(refs.size(), &obs);
        std::vector<const ReferenceWindow*> r;
        r.reserve(refs.size());
        for (const auto& w : refs) r.push_back(&w);
        std::vector<ScoreVector> out;
        out.reserve(refs.size());
        for (const auto& p : forward(params, o, r)) out.push_back(p.scores);
        return out;
    };
}

Scorer oracle_scorer(const RobotModel& robot) {
    return [robot](const SimState& state, const ObservationWindow&, const std::vector<ReferenceWindow>& refs) {
        std::vector<ScoreVector> out;
        out.reserve(refs.size());
        for (const auto& w : refs) {
            const RolloutResult run = rollout(robot, state, w.states());
            out.push_back(compute_scores(w.states(), run.executed, run.fall));
        }
        return out;
    };
}

json to_json(const AdaptTrace& t, bool include_executed) {
    json ticks = json::array();
    for (const auto& k : t.ticks) {
        json predicted = json::array();
        for (const auto& s : k.predicted) predicted.push_back(to_json(s));
        ticks.push_back({{"t", k.t},
                         {"scalars", k.scalars},
                         {"chosen", k.chosen},
                         {"switched", k.switched},
                         {"predicted", std::move(predicted)}});
    }
    json j{{"ticks", std::move(ticks)},
           {"fall", t.fall},
           {"fall_frame", t.fall_frame ? json(*t.fall_frame) : json(nullptr)},
           {"root_path_rmse_vs_command", t.root_path_rmse},
           {"switches", t.switches}};
    if (include_executed) j["executed"] = sequence_to_json(t.executed);
    return j;
}

namespace {

// Shared by the adaptive and baseline modes, so a run without switches is
// bit-identical to the baseline.
AdaptTrace run_loop(const TaskSpec& task, const Scorer* scorer, const NormStats& norm, const RobotModel& robot,
                    const AdapterConfig& cfg, const GeneratorOptions& gen) {
    const MotionSequence original = generate_reference(task, gen);
    if (original.joints() != static_cast<std::size_t>(robot.S)) {
        throw ShapeError("adapt: reference has " + std::to_string(original.joints()) + " joints, robot has " +
                         std::to_string(robot.S));
    }
    const double dt = original.dt();
    const std::size_t L = original.size();
    const auto To = static_cast<std::size_t>(std::lround(cfg.observe_s / dt));
    const auto Tf = static_cast<std::size_t>(std::lround(cfg.horizon_s / dt));
    if (scorer && L < To + Tf) {
        throw InputError("adapt: task is " + std::to_string(L) + " frames, needs at least T_o + T_f = " +
                         std::to_string(To + Tf));
    }

    EditOptions eopt;
    eopt.rest_pose = family_rest_pose(task.family, robot.S);
    const auto reattach = static_cast<std::size_t>(std::llround(eopt.reattach_fraction * static_cast<double>(Tf)));

    std::vector<RobotState> command = original.frames();
    auto root_vel = root_velocities(original);
    SimState state = init_state(robot, original.front());
    std::vector<RobotState> executed;
    executed.reserve(L);
    std::vector<TickLog> ticks;
    std::size_t switches = 0;
    const std::uint64_t loop_seed = derive_seed(cfg.seed, "adapt", task.seed);

    for (std::size_t t = 0; t < L; ++t) {
        if (scorer && t >= To && (t - To) % cfg.replan_every == 0 && t + Tf <= L) {
            const ObservationWindow obs(
                MotionSequence(std::vector<RobotState>(executed.end() - static_cast<std::ptrdiff_t>(To), executed.end()),
                               dt),
                To);
            const RobotState current = command[t];
            const MotionSequence orig_future = slice_window(original, t, Tf);
            const std::uint64_t tick_seed = derive_seed(loop_seed, "tick", t);

            std::vector<ReferenceWindow> windows;
            windows.reserve(cfg.n_candidates + 1);
            windows.emplace_back(
                MotionSequence(std::vector<RobotState>(command.begin() + static_cast<std::ptrdiff_t>(t),
                                                       command.begin() + static_cast<std::ptrdiff_t>(t + Tf)),
                               dt),
                Tf);
            for (auto& c : edit_candidates(current, ReferenceWindow(orig_future, Tf), cfg.n_candidates, tick_seed, eopt)) {
                windows.push_back(std::move(c));
            }

            TickLog tick;
            tick.t = t;
            tick.commanded = current;
            tick.predicted = (*scorer)(state, obs, windows);
            if (tick.predicted.size() != windows.size()) throw ShapeError("adapt: scorer returned wrong count");
            for (const auto& s : tick.predicted) tick.scalars.push_back(scalarize(s, cfg.rank_weights, norm));

            // Best candidate: lowest scalar, then smaller root deviation, then lower index.
            std::size_t best = 1;
            double best_dev = root_path_rmse(windows[1].states(), orig_future);
            for (std::size_t i = 2; i < windows.size(); ++i) {
                const double dev = root_path_rmse(windows[i].states(), orig_future);
                if (tick.scalars[i] < tick.scalars[best] || (tick.scalars[i] == tick.scalars[best] && dev < best_dev)) {
                    best = i;
                    best_dev = dev;
                }
            }
            const double inc = tick.scalars[0];
            const double bar = inc - cfg.switch_margin * std::abs(inc);
            if (std::isfinite(cfg.switch_margin) && tick.scalars[best] < bar) {
                tick.chosen = best;
                tick.switched = true;
                ++switches;
                const auto edit = CandidateEdit::sample(best - 1, original.joints(), tick_seed, eopt);
                const MotionSequence tail =
                    apply_edit(current, slice_window(original, t, L - t), edit, eopt, reattach);
                std::copy(tail.frames().begin(), tail.frames().end(), command.begin() + static_cast<std::ptrdiff_t>(t));
                root_vel = root_velocities(MotionSequence(command, dt));
            }
            ticks.push_back(std::move(tick));
        }

        state = step(robot, state, command[t], root_vel[t], dt);
        executed.push_back(state.robot);
        if (state.fallen) break;
    }

    MotionSequence done(std::move(executed), dt);
    const double rmse = root_path_rmse(done, slice_window(original, 0, done.size()));
    return AdaptTrace{std::move(ticks), state.fallen, state.fall_frame, rmse, switches, std::move(done),
                      MotionSequence(std::move(command), dt)};
}

}  // namespace

AdaptTrace adapt_rollout(const TaskSpec& task, const Scorer& scorer, const NormStats& norm, const RobotModel& robot,
                         const AdapterConfig& cfg, const GeneratorOptions& gen) {
    cfg.validate();
    return run_loop(task, &scorer, norm, robot, cfg, gen);
}

AdaptTrace adapt_rollout(const TaskSpec& task, const SawParams& model, const RobotModel& robot,
                         const AdapterConfig& cfg, const GeneratorOptions& gen) {
    cfg.validate();
    if (model.config.horizon_seconds != cfg.horizon_s) {
        throw ConfigError("adapter.horizon_s: " + std::to_string(cfg.horizon_s) + " s, checkpoint horizon is " +
                          std::to_string(model.config.horizon_seconds) + " s");
    }
    if (model.config.T_o != static_cast<int>(std::lround(cfg.observe_s / gen.dt)) ||
        model.config.T_f != static_cast<int>(std::lround(cfg.horizon_s / gen.dt))) {
        throw ConfigError("adapter: checkpoint windows do not match observe_s/horizon_s");
    }
    const Scorer scorer = saw_scorer(model);
    return run_loop(task, &scorer, model.target_norm, robot, cfg, gen);
}

AdaptTrace baseline_rollout(const TaskSpec& task, const RobotModel& robot, const GeneratorOptions& gen) {
    return run_loop(task, nullptr, NormStats{}, robot, AdapterConfig{}, gen);
}

json to_json(const FallPreventionReport& r) {
    return json{{"tasks", r.tasks},
                {"baseline_falls", r.baseline_falls},
                {"adapted_falls", r.adapted_falls},
                {"prevented_fraction", r.prevented_fraction},
                {"mean_root_rmse", r.mean_root_rmse},
                {"no_baseline_falls", r.no_baseline_falls}};
}

FallPreventionReport summarize(const std::vector<AdaptTrace>& baseline,
                               const std::vector<std::optional<AdaptTrace>>& adapted) {
    if (baseline.size() != adapted.size()) throw ShapeError("summarize: trace counts differ");
    FallPreventionReport r;
    r.tasks = baseline.size();
    double rmse = 0.0;
    std::size_t prevented = 0;
    for (std::size_t i = 0; i < baseline.size(); ++i) {
        if (!baseline[i].fall) continue;
        ++r.baseline_falls;
        if (!adapted[i]) throw InputError("summarize: missing adapted trace for a baseline fall");
        if (adapted[i]->fall) {
            ++r.adapted_falls;
        } else {
            ++prevented;
            rmse += adapted[i]->root_path_rmse;
        }
    }
    r.no_baseline_falls = r.baseline_falls == 0;
    r.prevented_fraction = r.no_baseline_falls ? 0.0
                                               : static_cast<double>(r.baseline_falls - r.adapted_falls) /
                                                     static_cast<double>(r.baseline_falls);
    r.mean_root_rmse = prevented ? rmse / static_cast<double>(prevented) : 0.0;
    return r;
}

FallPreventionReport fall_prevention_report(const std::vector<TaskSpec>& tasks, const Scorer& scorer,
                                            const NormStats& norm, const RobotModel& robot,
                                            const AdapterConfig& cfg, unsigned threads,
                                            const GeneratorOptions& gen) {
    if (tasks.empty()) throw InputError("fall_prevention_report: no tasks");
    cfg.validate();
    std::vector<std::optional<AdaptTrace>> base(tasks.size());
    std::vector<std::optional<AdaptTrace>> adapted(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        base[i] = baseline_rollout(tasks[i], robot, gen);
        if (base[i]->fall) adapted[i] = run_loop(tasks[i], &scorer, norm, robot, cfg, gen);
    });
    std::vector<AdaptTrace> baseline;
    baseline.reserve(base.size());
    for (auto& b : base) baseline.push_back(std::move(*b));
    return summarize(baseline, adapted);
}

}  // namespace saw
