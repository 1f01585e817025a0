#include "saw/sim.hpp"

#include <algorithm>
#include <cmath>

#include "saw/errors.hpp"
#include "saw/random.hpp"

namespace saw {

using nlohmann::json;

namespace {

constexpr double kJitter = 0.05;
// Proportional gain of the rate-limited yaw tracker, 1/s.
constexpr double kYawGain = 10.0;

}  // namespace

RobotModel RobotModel::defaults(int joints) {
    RobotModel m;
    m.S = joints;
    m.joint_lo.assign(static_cast<std::size_t>(joints), -2.5);
    m.joint_hi.assign(static_cast<std::size_t>(joints), 2.5);
    return m;
}

void RobotModel::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("robot_model." + field + ": " + why);
    };
    if (S < 1) fail("S", "must be >= 1");
    if (joint_lo.size() != static_cast<std::size_t>(S)) fail("joint_lo", "length must equal S");
    if (joint_hi.size() != static_cast<std::size_t>(S)) fail("joint_hi", "length must equal S");
    for (int i = 0; i < S; ++i) {
        if (!(joint_lo[i] < joint_hi[i])) fail("joint_lo", "must be < joint_hi componentwise");
    }
    const std::pair<const char*, double> positive[] = {
        {"kp", kp},         {"kd", kd},       {"a_max", a_max},         {"v_max", v_max},
        {"root_a_max", root_a_max}, {"root_v_max", root_v_max}, {"yaw_rate_max", yaw_rate_max},
        {"h0", h0},         {"h_fall", h_fall}, {"k_rec", k_rec},       {"k_fall", k_fall},
        {"c_d", c_d},       {"e_cap", e_cap}, {"c_v", c_v}};
    for (const auto& [name, v] : positive) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(name, "must be positive and finite");
    }
    if (!(h_fall < h0)) fail("h_fall", "must be below h0");
}

json to_json(const RobotModel& m) {
    return json{{"S", m.S},           {"joint_lo", m.joint_lo},   {"joint_hi", m.joint_hi},
                {"kp", m.kp},         {"kd", m.kd},               {"a_max", m.a_max},
                {"v_max", m.v_max},   {"root_a_max", m.root_a_max}, {"root_v_max", m.root_v_max},
                {"yaw_rate_max", m.yaw_rate_max}, {"h0", m.h0},   {"h_fall", m.h_fall},
                {"k_rec", m.k_rec},   {"k_fall", m.k_fall},       {"c_d", m.c_d},
                {"e_cap", m.e_cap},   {"c_v", m.c_v}};
}

RobotModel robot_model_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected object");
    int joints = kDefaultJoints;
    if (j.contains("S")) {
        if (!j["S"].is_number_integer()) throw ConfigError(where + ".S: expected integer");
        joints = j["S"].get<int>();
        if (joints < 1) throw ConfigError(where + ".S: must be >= 1");
    }
    RobotModel m = RobotModel::defaults(joints);
    auto num = [&](const char* key, double& dst) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) throw ConfigError(where + "." + key + ": expected number");
        dst = j[key].get<double>();
    };
    auto vec = [&](const char* key, std::vector<double>& dst) {
        if (!j.contains(key)) return;
        if (!j[key].is_array()) throw ConfigError(where + "." + key + ": expected array");
        dst.clear();
        for (const auto& v : j[key]) {
            if (!v.is_number()) throw ConfigError(where + "." + key + ": expected numbers");
            dst.push_back(v.get<double>());
        }
    };
    vec("joint_lo", m.joint_lo);
    vec("joint_hi", m.joint_hi);
    num("kp", m.kp);
    num("kd", m.kd);
    num("a_max", m.a_max);
    num("v_max", m.v_max);
    num("root_a_max", m.root_a_max);
    num("root_v_max", m.root_v_max);
    num("yaw_rate_max", m.yaw_rate_max);
    num("h0", m.h0);
    num("h_fall", m.h_fall);
    num("k_rec", m.k_rec);
    num("k_fall", m.k_fall);
    num("c_d", m.c_d);
    num("e_cap", m.e_cap);
    num("c_v", m.c_v);
    m.validate();
    return m;
}

SimState init_state(const RobotModel& model, const RobotState& pose,
                    std::optional<std::uint64_t> jitter_seed) {
    if (pose.joints() != static_cast<std::size_t>(model.S) || pose.joint_vel.size() != pose.joints()) {
        throw ShapeError("init_state: pose has " + std::to_string(pose.joints()) +
                         " joints, model expects " + std::to_string(model.S));
    }
    SimState s;
    s.robot = pose;
    s.robot.root_pos[2] = model.h0;
    s.robot.root_quat = quat_canonicalize(pose.root_quat);
    if (jitter_seed) {
        Rng rng(*jitter_seed);
        for (auto& q : s.robot.joint_pos) q += rng.uniform(-kJitter, kJitter);
        for (auto& v : s.robot.joint_vel) v += rng.uniform(-kJitter, kJitter);
    }
    for (int i = 0; i < model.S; ++i) {
        s.robot.joint_pos[i] = std::clamp(s.robot.joint_pos[i], model.joint_lo[i], model.joint_hi[i]);
    }
    return s;
}

SimState step(const RobotModel& model, const SimState& state, const RobotState& ref,
              const std::array<double, 2>& ref_root_vel, double dt) {
    const auto S = static_cast<std::size_t>(model.S);
    if (ref.joint_pos.size() != S || ref.joint_vel.size() != S || state.robot.joints() != S) {
        throw ShapeError("step: joint dimension mismatch (model S=" + std::to_string(S) + ", ref " +
                         std::to_string(ref.joint_pos.size()) + ")");
    }
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(ref.joint_pos.begin(), ref.joint_pos.end(), finite) ||
        !std::all_of(ref.joint_vel.begin(), ref.joint_vel.end(), finite) ||
        !std::all_of(ref.root_pos.begin(), ref.root_pos.end(), finite) || !finite(ref_root_vel[0]) ||
        !finite(ref_root_vel[1]) || !finite(ref.root_quat.w) || !finite(ref.root_quat.z)) {
        throw InputError("step: non-finite reference value");
    }

    SimState next = state;
    ++next.frame;
    if (state.fallen) return next;

    auto& q = next.robot.joint_pos;
    auto& qd = next.robot.joint_vel;
    double err2 = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        const double e = ref.joint_pos[i] - q[i];
        err2 += e * e;
        const double a =
            std::clamp(model.kp * e + model.kd * (ref.joint_vel[i] - qd[i]), -model.a_max, model.a_max);
        qd[i] = std::clamp(qd[i] + a * dt, -model.v_max, model.v_max);
        q[i] = std::clamp(q[i] + qd[i] * dt, model.joint_lo[i], model.joint_hi[i]);
    }

    // Root xy: PD with the acceleration norm clamped to root_a_max.
    auto& p = next.robot.root_pos;
    auto& v = next.root_vel;
    double ax = model.kp * (ref.root_pos[0] - p[0]) + model.kd * (ref_root_vel[0] - v[0]);
    double ay = model.kp * (ref.root_pos[1] - p[1]) + model.kd * (ref_root_vel[1] - v[1]);
    const double an = std::hypot(ax, ay);
    if (an > model.root_a_max) {
        ax *= model.root_a_max / an;
        ay *= model.root_a_max / an;
    }
    v[0] += ax * dt;
    v[1] += ay * dt;
    p[0] += v[0] * dt;
    p[1] += v[1] * dt;

    const double yaw = quat_yaw(state.robot.root_quat);
    const double yaw_err = wrap_angle(quat_yaw(ref.root_quat) - yaw);
    const double yaw_rate = std::clamp(kYawGain * yaw_err, -model.yaw_rate_max, model.yaw_rate_max);
    next.robot.root_quat = yaw_to_quat(yaw + yaw_rate * dt);

    // Balance proxy: tracking stress pushes the root down, a damped spring restores h0.
    const double over_speed = std::max(0.0, std::hypot(ref_root_vel[0], ref_root_vel[1]) - model.root_v_max);
    const double stress = err2 / static_cast<double>(S) + model.c_v * over_speed * over_speed;
    double& h = p[2];
    next.height_vel += dt * (model.k_rec * (model.h0 - h) - model.k_fall * std::max(0.0, stress - model.e_cap) -
                             model.c_d * state.height_vel);
    h += dt * next.height_vel;
    if (h < model.h_fall) {
        next.fallen = true;
        next.fall_frame = state.frame;
        next.height_vel = 0.0;
    }
    return next;
}

std::vector<std::array<double, 2>> root_velocities(const MotionSequence& ref) {
    const std::size_t n = ref.size();
    std::vector<std::array<double, 2>> vel(n, {0.0, 0.0});
    if (n < 2) return vel;
    const double h = ref.dt();
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t a = t == 0 ? 0 : t - 1;
        const std::size_t b = t + 1 == n ? n - 1 : t + 1;
        const double span = h * static_cast<double>(b - a);
        vel[t] = {(ref[b].root_pos[0] - ref[a].root_pos[0]) / span,
                  (ref[b].root_pos[1] - ref[a].root_pos[1]) / span};
    }
    return vel;
}

RolloutResult rollout(const RobotModel& model, const SimState& init, const MotionSequence& ref) {
    return rollout(model, init, ref, root_velocities(ref));
}

RolloutResult rollout(const RobotModel& model, const SimState& init, const MotionSequence& ref,
                      const std::vector<std::array<double, 2>>& ref_root_vel) {
    if (ref.joints() != static_cast<std::size_t>(model.S)) {
        throw ShapeError("rollout: reference has " + std::to_string(ref.joints()) +
                         " joints, model expects " + std::to_string(model.S));
    }
    if (ref_root_vel.size() != ref.size()) throw ShapeError("rollout: root velocity count != frames");
    std::vector<RobotState> executed;
    executed.reserve(ref.size());
    SimState s = init;
    for (std::size_t t = 0; t < ref.size(); ++t) {
        s = step(model, s, ref[t], ref_root_vel[t], ref.dt());
        executed.push_back(s.robot);
    }
    RolloutResult r{MotionSequence(std::move(executed), ref.dt()), s.fallen, std::nullopt, s};
    if (s.fallen) {
        const std::size_t ff = s.fall_frame.value_or(init.frame);
        r.fall_frame = ff >= init.frame ? ff - init.frame : 0;
    }
    return r;
}

}  // namespace saw
