#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace saw {

/// Default control timestep (50 Hz): 0.5 s = 25 frames, 1/2/3 s = 50/100/150 frames.
inline constexpr double kDefaultDt = 0.02;
inline constexpr int kDefaultJoints = 8;

/// Unit quaternion (w, x, y, z).
struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Quat&, const Quat&) = default;
};

/// Normalizes q and picks the sign with w >= 0 (when w == 0, the first nonzero
/// component is made positive). Idempotent bit-for-bit, and f(q) == f(-q).
/// Throws InputError on zero or non-finite input.
Quat quat_canonicalize(const Quat& q);

/// Rotation of `yaw` radians about +z, canonicalized.
Quat yaw_to_quat(double yaw);

/// Yaw angle of a (yaw-only) quaternion in (-pi, pi].
double quat_yaw(const Quat& q);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

using Vec3 = std::array<double, 3>;

/// One frame of robot state: root pose plus joint angles and velocities.
struct RobotState {
    Vec3 root_pos{0.0, 0.0, 0.0};
    Quat root_quat{};
    std::vector<double> joint_pos;
    std::vector<double> joint_vel;

    std::size_t joints() const noexcept { return joint_pos.size(); }

    friend bool operator==(const RobotState&, const RobotState&) = default;
};

/// Length of a flattened frame: 3 + 4 + 2 S.
inline std::size_t frame_features(std::size_t joints) { return 7 + 2 * joints; }

/// Appends [root_pos, root_quat, joint_pos, joint_vel] of `s` to `out`.
void flatten_state(const RobotState& s, std::vector<double>& out);

/// Time-indexed run of RobotStates with a fixed timestep.
///
/// Construction validates: at least one frame, dt > 0, a common joint count,
/// finite values, and unit quaternions (which are stored sign-canonical).
class MotionSequence {
public:
    MotionSequence(std::vector<RobotState> frames, double dt = kDefaultDt);

    const std::vector<RobotState>& frames() const noexcept { return frames_; }
    const RobotState& operator[](std::size_t i) const { return frames_[i]; }
    const RobotState& front() const { return frames_.front(); }
    const RobotState& back() const { return frames_.back(); }
    std::size_t size() const noexcept { return frames_.size(); }
    double dt() const noexcept { return dt_; }
    std::size_t joints() const noexcept { return frames_.front().joints(); }
    double duration() const noexcept { return dt_ * static_cast<double>(frames_.size()); }

    friend bool operator==(const MotionSequence&, const MotionSequence&) = default;

private:
    std::vector<RobotState> frames_;
    double dt_;
};

/// The last T_o executed robot states before the current time.
class ObservationWindow {
public:
    ObservationWindow(MotionSequence states, std::size_t expected_len);
    const MotionSequence& states() const noexcept { return states_; }
    std::size_t size() const noexcept { return states_.size(); }

private:
    MotionSequence states_;
};

/// The next T_f reference frames to be followed.
class ReferenceWindow {
public:
    ReferenceWindow(MotionSequence states, std::size_t expected_len);
    const MotionSequence& states() const noexcept { return states_; }
    std::size_t size() const noexcept { return states_.size(); }

private:
    MotionSequence states_;
};

/// Per-frame joint-space derivative of order 1 (rad/s) or 2 (rad/s^2).
/// Central differences inside, one-sided at the first and last frame; the
/// output has one S-vector per input frame. Needs at least order + 1 frames.
std::vector<std::vector<double>> finite_diff(const MotionSequence& seq, int order);

/// Contiguous copy of frames [start, start + len).
MotionSequence slice_window(const MotionSequence& seq, std::size_t start, std::size_t len);

/// Frames [start, start + len), but pads with the last frame past the end.
MotionSequence slice_clamped(const MotionSequence& seq, std::size_t start, std::size_t len);

// Canonical sequence record: {"dt": x, "frames": [{"p":[3],"quat":[4],"q":[S],"qd":[S]}, ...]}.
nlohmann::json sequence_to_json(const MotionSequence& seq);
/// `where` prefixes field paths in error messages (e.g. "line 12: observation").
MotionSequence sequence_from_json(const nlohmann::json& j, const std::string& where = "");

std::string serialize_sequence(const MotionSequence& seq);
MotionSequence deserialize_sequence(const std::string& text);

nlohmann::json state_to_json(const RobotState& s);
RobotState state_from_json(const nlohmann::json& j, const std::string& where = "");

}  // namespace saw
