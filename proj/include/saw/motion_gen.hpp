#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "saw/motion.hpp"

namespace saw {

enum class Family { kStand, kWalk, kSquat, kJump, kReach, kSpin };

inline constexpr Family kAllFamilies[] = {Family::kStand, Family::kWalk, Family::kSquat,
                                          Family::kJump,  Family::kReach, Family::kSpin};

std::string_view family_name(Family f);
/// Throws InputError for unknown names.
Family family_from_name(std::string_view name);

struct Waypoint {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;
};

/// Structured task command: which motion, how hard, how long.
struct TaskSpec {
    Family family = Family::kStand;
    double difficulty = 0.0;  // [0, 1]
    double duration_s = 6.0;  // [3, 12]
    std::optional<std::vector<Waypoint>> root_path;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const TaskSpec& t);
TaskSpec task_from_json(const nlohmann::json& j, const std::string& where = "task");

/// Shape of the generated references (robot-side constants the generator needs).
struct GeneratorOptions {
    int joints = kDefaultJoints;
    double dt = kDefaultDt;
    double nominal_height = 0.8;
};

/// Joint configuration the family's motion oscillates around.
std::vector<double> family_rest_pose(Family f, int joints);

/// Deterministic smooth reference for `spec`. Amplitude and frequency scale
/// linearly with difficulty from a trackable baseline to an infeasible extreme,
/// and the motion fades in over the first second or two.
MotionSequence generate_reference(const TaskSpec& spec, const GeneratorOptions& opt = {});

// ---------------------------------------------------------------------------
// Candidate editing

struct EditOptions {
    std::vector<double> rest_pose;       // empty: all zeros
    double reattach_fraction = 0.25;     // of the window
    double lambda_lo = 0.4;
    double lambda_hi = 1.0;
    double noise_amplitude = 0.1;        // rad, bound on the summed noise
};

/// Parameters of one edit: joint deviations scaled by `lambda` around the rest
/// pose plus two low-frequency sinusoids per joint.
struct CandidateEdit {
    double lambda = 1.0;
    struct Wave {
        double amplitude = 0.0;  // rad
        double freq_hz = 0.0;
        double phase = 0.0;
    };
    std::vector<std::array<Wave, 2>> noise;  // per joint; empty for the pure blend

    /// Draws the edit of candidate `index` (index 0 is the pure blend).
    static CandidateEdit sample(std::size_t index, std::size_t joints, std::uint64_t seed,
                                const EditOptions& opt);
};

/// Applies `edit` to `original` (the commanded future, any length) and blends
/// from `current` with a cubic Hermite offset that vanishes after
/// `reattach_frames`. Frame 0 of the result is `current` exactly. The root
/// follows the original path after the blend.
MotionSequence apply_edit(const RobotState& current, const MotionSequence& original,
                          const CandidateEdit& edit, const EditOptions& opt,
                          std::size_t reattach_frames);

/// n edited versions of `original_future`, each starting at `current`.
/// Candidate 0 is the pure Hermite blend; the others add amplitude scaling and
/// smooth noise drawn from `seed`.
std::vector<ReferenceWindow> edit_candidates(const RobotState& current,
                                             const ReferenceWindow& original_future, std::size_t n,
                                             std::uint64_t seed, const EditOptions& opt = {});

/// Root xy RMSE between two equally long sequences, meters.
double root_path_rmse(const MotionSequence& a, const MotionSequence& b);

}  // namespace saw
