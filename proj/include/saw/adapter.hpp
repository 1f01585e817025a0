#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "saw/model.hpp"
#include "saw/motion_gen.hpp"
#include "saw/scoring.hpp"
#include "saw/sim.hpp"

namespace saw {

struct AdapterConfig {
    std::size_t n_candidates = 15;
    std::size_t replan_every = 25;  // frames
    int horizon_s = 1;
    double switch_margin = 0.05;  // relative; +inf disables switching
    RankWeights rank_weights;
    std::uint64_t seed = 0;
    double observe_s = 0.5;

    void validate() const;
};

nlohmann::json to_json(const AdapterConfig& c);
AdapterConfig adapter_config_from_json(const nlohmann::json& j, const std::string& where = "adapter");

/// Scores every reference window given the observed past and the true
/// simulator state at the replan tick. Must be a pure function of its inputs.
using Scorer = std::function<std::vector<ScoreVector>(const SimState& state, const ObservationWindow& obs,
                                                      const std::vector<ReferenceWindow>& refs)>;

/// Learned scorer: SAW forward on each (obs, ref) pair. Keeps a reference to
/// `params`, which must outlive it.
Scorer saw_scorer(const SawParams& params);

/// Ground-truth scorer: simulates each window from the true state and scores
/// the outcome exactly.
Scorer oracle_scorer(const RobotModel& robot);

struct TickLog {
    std::size_t t = 0;
    std::vector<double> scalars;  // [incumbent, candidate 1..n]
    std::vector<ScoreVector> predicted;
    std::size_t chosen = 0;  // 0 = incumbent
    bool switched = false;
    RobotState commanded;  // incumbent pose at t before the decision
};

struct AdaptTrace {
    std::vector<TickLog> ticks;
    bool fall = false;
    std::optional<std::size_t> fall_frame;
    double root_path_rmse = 0.0;  // executed root xy vs the original command
    std::size_t switches = 0;
    MotionSequence executed;
    MotionSequence commanded;  // the reference actually followed, full task length
};

nlohmann::json to_json(const AdaptTrace& t, bool include_executed = true);

/// Receding-horizon loop: follows the incumbent reference and, every
/// replan_every frames once T_o frames have been executed, scores the
/// incumbent's next T_f frames against n_candidates edits of the original
/// command. Switches when the best candidate beats the incumbent by the
/// relative margin. The trace ends at the fall frame if the robot falls.
/// The normalization used for ranking is `norm`.
AdaptTrace adapt_rollout(const TaskSpec& task, const Scorer& scorer, const NormStats& norm, const RobotModel& robot,
                         const AdapterConfig& cfg, const GeneratorOptions& gen = {});

/// Convenience overload with the SAW scorer; checks the model horizon and windows.
AdaptTrace adapt_rollout(const TaskSpec& task, const SawParams& model, const RobotModel& robot,
                         const AdapterConfig& cfg, const GeneratorOptions& gen = {});

/// Follows the unmodified reference. Same trace schema, no ticks.
AdaptTrace baseline_rollout(const TaskSpec& task, const RobotModel& robot, const GeneratorOptions& gen = {});

struct FallPreventionReport {
    std::size_t tasks = 0;
    std::size_t baseline_falls = 0;
    std::size_t adapted_falls = 0;  // among tasks where the baseline fell
    double prevented_fraction = 0.0;
    double mean_root_rmse = 0.0;  // over prevented runs, meters
    bool no_baseline_falls = false;
};

nlohmann::json to_json(const FallPreventionReport& r);

/// `adapted[i]` may be empty for tasks where the baseline did not fall.
FallPreventionReport summarize(const std::vector<AdaptTrace>& baseline,
                               const std::vector<std::optional<AdaptTrace>>& adapted);

/// Runs the baseline on every task and the adapter on those where it falls.
FallPreventionReport fall_prevention_report(const std::vector<TaskSpec>& tasks, const Scorer& scorer,
                                            const NormStats& norm, const RobotModel& robot,
                                            const AdapterConfig& cfg, unsigned threads = 1,
                                            const GeneratorOptions& gen = {});

}  // namespace saw
