#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "saw/motion.hpp"

namespace saw {

/// Capability limits and balance-proxy coefficients of the simulated robot.
struct RobotModel {
    int S = kDefaultJoints;
    std::vector<double> joint_lo;  // rad
    std::vector<double> joint_hi;  // rad
    double kp = 100.0;             // 1/s^2
    double kd = 20.0;              // 1/s
    double a_max = 40.0;           // rad/s^2
    double v_max = 6.0;            // rad/s
    double root_a_max = 10.0;      // m/s^2
    double root_v_max = 1.5;       // m/s
    double yaw_rate_max = 3.0;     // rad/s
    double h0 = 0.8;               // m
    double h_fall = 0.4;           // m
    double k_rec = 30.0;
    double k_fall = 25.0;
    double c_d = 8.0;
    double e_cap = 0.05;
    double c_v = 2.0;

    /// Default model with S joints limited to [-2.5, 2.5] rad.
    static RobotModel defaults(int joints = kDefaultJoints);

    /// Throws ConfigError naming the first offending field.
    void validate() const;
};

nlohmann::json to_json(const RobotModel& m);
/// Missing fields keep their defaults; joint limits default to +-2.5 rad for S joints.
RobotModel robot_model_from_json(const nlohmann::json& j, const std::string& where = "robot_model");

struct SimState {
    RobotState robot;
    std::array<double, 2> root_vel{0.0, 0.0};  // m/s, world xy
    double height_vel = 0.0;                   // m/s
    bool fallen = false;
    std::optional<std::size_t> fall_frame;
    std::size_t frame = 0;  // number of steps taken

    friend bool operator==(const SimState&, const SimState&) = default;
};

/// Initial state at `pose` with the root lifted to h0. With a seed, joint
/// positions/velocities get uniform +-0.05 rad (rad/s) jitter drawn from it.
SimState init_state(const RobotModel& model, const RobotState& pose,
                    std::optional<std::uint64_t> jitter_seed = std::nullopt);

/// One semi-implicit Euler step toward the reference frame `ref`, whose root
/// moves at `ref_root_vel` (xy, m/s). A fallen state only advances its frame count.
SimState step(const RobotModel& model, const SimState& state, const RobotState& ref,
              const std::array<double, 2>& ref_root_vel, double dt);

/// Reference root xy velocity per frame (central differences, one-sided ends).
std::vector<std::array<double, 2>> root_velocities(const MotionSequence& ref);

struct RolloutResult {
    MotionSequence executed;
    bool fall = false;
    std::optional<std::size_t> fall_frame;  // frame index within this rollout
    SimState final_state;
};

/// Tracks every frame of `ref` from `init`. Frame t of `executed` is the state
/// after stepping with ref frame t. Pure function of its arguments.
RolloutResult rollout(const RobotModel& model, const SimState& init, const MotionSequence& ref);

/// Same as rollout() but with root velocities supplied by the caller, e.g. when
/// `ref` is a window cut from a longer reference.
RolloutResult rollout(const RobotModel& model, const SimState& init, const MotionSequence& ref,
                      const std::vector<std::array<double, 2>>& ref_root_vel);

}  // namespace saw
