#include "saw/motion_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "saw/errors.hpp"
#include "saw/random.hpp"

namespace saw {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct FamilyProfile {
    std::string_view name;
    double amp0, amp1;    // rad, at difficulty 0 and 1
    double freq0, freq1;  // Hz
};

// Baselines are trackable by the default robot; the difficulty-1 ends are not.
constexpr FamilyProfile kProfiles[] = {
    {"stand", 0.0, 2.0, 0.3, 2.1},
    {"walk", 0.3, 1.8, 0.8, 2.6},
    {"squat", 0.3, 2.0, 0.5, 2.4},
    {"jump", 0.2, 2.0, 0.8, 2.9},
    {"reach", 0.4, 2.1, 0.3, 2.1},
    {"spin", 0.2, 2.0, 0.5, 2.5},
};

const FamilyProfile& profile(Family f) { return kProfiles[static_cast<int>(f)]; }

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

bool is_leg(int j, int joints) { return j < (joints + 1) / 2; }

}  // namespace

std::string_view family_name(Family f) { return profile(f).name; }

Family family_from_name(std::string_view name) {
    for (Family f : kAllFamilies) {
        if (family_name(f) == name) return f;
    }
    throw InputError("unknown task family '" + std::string(name) + "'");
}

void TaskSpec::validate() const {
    if (!(difficulty >= 0.0 && difficulty <= 1.0)) throw InputError("task difficulty must be in [0, 1]");
    if (!(duration_s >= 3.0 && duration_s <= 12.0)) throw InputError("task duration_s must be in [3, 12]");
    if (root_path && root_path->empty()) throw InputError("task root_path must not be empty when given");
}

json to_json(const TaskSpec& t) {
    json j{{"family", family_name(t.family)},
           {"difficulty", t.difficulty},
           {"duration_s", t.duration_s},
           {"seed", t.seed}};
    if (t.root_path) {
        json path = json::array();
        for (const auto& w : *t.root_path) path.push_back({w.x, w.y, w.yaw});
        j["root_path"] = std::move(path);
    }
    return j;
}

TaskSpec task_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected object");
    TaskSpec t;
    try {
        t.family = family_from_name(j.at("family").get<std::string>());
        t.difficulty = j.at("difficulty").get<double>();
        if (j.contains("duration_s")) t.duration_s = j["duration_s"].get<double>();
        if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("root_path") && !j["root_path"].is_null()) {
            std::vector<Waypoint> path;
            for (const auto& w : j["root_path"]) {
                if (!w.is_array() || w.size() != 3) throw ParseError(where + ".root_path: expected [x, y, yaw]");
                path.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
            }
            t.root_path = std::move(path);
        }
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    } catch (const InputError& e) {
        throw ParseError(where + ": " + e.what());
    }
    try {
        t.validate();
    } catch (const InputError& e) {
        throw ParseError(where + ": " + e.what());
    }
    return t;
}

std::vector<double> family_rest_pose(Family f, int joints) {
    std::vector<double> rest(static_cast<std::size_t>(joints), 0.0);
    for (int j = 0; j < joints; ++j) {
        const bool leg = is_leg(j, joints);
        switch (f) {
            case Family::kSquat: rest[j] = leg ? 0.3 : 0.0; break;
            case Family::kJump: rest[j] = leg ? 0.2 : 0.0; break;
            case Family::kReach: rest[j] = leg ? 0.0 : 0.3; break;
            default: break;
        }
    }
    return rest;
}

MotionSequence generate_reference(const TaskSpec& spec, const GeneratorOptions& opt) {
    spec.validate();
    if (opt.joints < 1 || !(opt.dt > 0.0)) throw InputError("generator options: joints >= 1 and dt > 0");
    const int S = opt.joints;
    const auto n = static_cast<std::size_t>(std::llround(spec.duration_s / opt.dt));
    const FamilyProfile& prof = profile(spec.family);
    const double d = spec.difficulty;
    const double amp = prof.amp0 + (prof.amp1 - prof.amp0) * d;
    const double omega = kTwoPi * (prof.freq0 + (prof.freq1 - prof.freq0) * d);

    Rng rng(derive_seed(spec.seed, "reference"));
    std::vector<double> phase(S), gain(S);
    for (int j = 0; j < S; ++j) {
        phase[j] = rng.uniform(0.0, kTwoPi);
        gain[j] = rng.uniform(0.85, 1.15);
    }
    const double ramp_s = std::min(rng.uniform(0.8, 2.0), 0.4 * spec.duration_s);
    const double intensity = rng.uniform(0.8, 1.2);
    const double heading = rng.uniform(-kPi, kPi);
    const double spin_dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const auto rest = family_rest_pose(spec.family, S);

    // Pattern of joint j at time t, amplitude 1 before gains.
    auto pattern = [&](int j, double t) {
        const bool leg = is_leg(j, S);
        const double alt = (j % 2 == 0) ? 0.0 : kPi;
        switch (spec.family) {
            case Family::kStand: return std::sin(omega * t + phase[j]);
            case Family::kWalk:
                return leg ? std::sin(omega * t + alt) : 0.6 * std::sin(omega * t + alt + kPi);
            case Family::kSquat:
                return leg ? std::sin(omega * t) : 0.3 * std::sin(omega * t + phase[j]);
            case Family::kJump: {
                if (!leg) return 0.5 * std::sin(omega * t + phase[j]);
                const double s = std::sin(omega * t);
                return s * s * s;
            }
            case Family::kReach:
                return leg ? 0.4 * std::sin(omega * t + phase[j]) : std::sin(omega * t + phase[j]);
            case Family::kSpin: return 0.7 * std::sin(omega * t + phase[j]);
        }
        return 0.0;
    };

    // Root speed / yaw rate profiles for the family-default path.
    const double walk_speed = 0.4 + 1.2 * d;
    const double hop_speed = 0.3 + 0.6 * d;
    const double spin_rate = spin_dir * (0.5 + 3.5 * d);

    std::vector<RobotState> frames(n);
    double x = 0.0, y = 0.0, yaw = heading;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * opt.dt;
        const double env = smoothstep(t / ramp_s);
        RobotState& f = frames[k];
        f.joint_pos.resize(S);
        for (int j = 0; j < S; ++j) f.joint_pos[j] = rest[j] + env * intensity * amp * gain[j] * pattern(j, t);

        if (spec.root_path) {
            const auto& path = *spec.root_path;
            if (path.size() == 1) {
                x = path[0].x;
                y = path[0].y;
                yaw = path[0].yaw;
            } else {
                const double u = std::clamp(t / spec.duration_s, 0.0, 1.0) * static_cast<double>(path.size() - 1);
                const std::size_t i = std::min(static_cast<std::size_t>(u), path.size() - 2);
                const double a = u - static_cast<double>(i);
                x = path[i].x + a * (path[i + 1].x - path[i].x);
                y = path[i].y + a * (path[i + 1].y - path[i].y);
                yaw = path[i].yaw + a * wrap_angle(path[i + 1].yaw - path[i].yaw);
            }
        } else if (k > 0) {
            switch (spec.family) {
                case Family::kWalk:
                    x += opt.dt * env * walk_speed * std::cos(heading);
                    y += opt.dt * env * walk_speed * std::sin(heading);
                    break;
                case Family::kJump:
                    x += opt.dt * env * hop_speed * std::cos(heading);
                    y += opt.dt * env * hop_speed * std::sin(heading);
                    break;
                case Family::kSpin: yaw += opt.dt * env * spin_rate; break;
                default: break;
            }
        }
        f.root_pos = {x, y, opt.nominal_height};
        f.root_quat = yaw_to_quat(yaw);
        f.joint_vel.assign(S, 0.0);
    }
    MotionSequence positions(std::move(frames), opt.dt);
    if (positions.size() < 2) return positions;
    const auto vel = finite_diff(positions, 1);
    std::vector<RobotState> out = positions.frames();
    for (std::size_t k = 0; k < out.size(); ++k) out[k].joint_vel = vel[k];
    return MotionSequence(std::move(out), opt.dt);
}

// ---------------------------------------------------------------------------

CandidateEdit CandidateEdit::sample(std::size_t index, std::size_t joints, std::uint64_t seed,
                                    const EditOptions& opt) {
    CandidateEdit e;
    if (index == 0) return e;
    Rng rng(derive_seed(seed, "candidate", index));
    e.lambda = rng.uniform(opt.lambda_lo, opt.lambda_hi);
    e.noise.resize(joints);
    for (auto& waves : e.noise) {
        for (auto& w : waves) {
            w.amplitude = rng.uniform(0.0, 0.5 * opt.noise_amplitude);
            w.freq_hz = rng.uniform(0.2, 0.8);
            w.phase = rng.uniform(0.0, kTwoPi);
        }
    }
    return e;
}

MotionSequence apply_edit(const RobotState& current, const MotionSequence& original, const CandidateEdit& edit,
                          const EditOptions& opt, std::size_t reattach_frames) {
    const std::size_t S = original.joints();
    if (current.joints() != S || current.joint_vel.size() != S) {
        throw ShapeError("apply_edit: current pose has " + std::to_string(current.joints()) +
                         " joints, reference has " + std::to_string(S));
    }
    if (!opt.rest_pose.empty() && opt.rest_pose.size() != S) throw ShapeError("apply_edit: rest pose size");
    if (!edit.noise.empty() && edit.noise.size() != S) throw ShapeError("apply_edit: noise size");
    const double dt = original.dt();
    auto rest = [&](std::size_t j) { return opt.rest_pose.empty() ? 0.0 : opt.rest_pose[j]; };

    // Edited target before blending.
    std::vector<RobotState> frames = original.frames();
    if (edit.lambda != 1.0 || !edit.noise.empty()) {
        for (std::size_t k = 0; k < frames.size(); ++k) {
            const double t = static_cast<double>(k) * dt;
            for (std::size_t j = 0; j < S; ++j) {
                double q = rest(j) + edit.lambda * (frames[k].joint_pos[j] - rest(j));
                double qd = edit.lambda * frames[k].joint_vel[j];
                if (!edit.noise.empty()) {
                    for (const auto& w : edit.noise[j]) {
                        const double om = kTwoPi * w.freq_hz;
                        q += w.amplitude * std::sin(om * t + w.phase);
                        qd += w.amplitude * om * std::cos(om * t + w.phase);
                    }
                }
                frames[k].joint_pos[j] = q;
                frames[k].joint_vel[j] = qd;
            }
        }
    }

    // Cubic Hermite offset from the current pose, decaying to zero (value and
    // slope) after `reattach_frames`.
    const std::size_t K = std::max<std::size_t>(reattach_frames, 1);
    const double tau = static_cast<double>(K) * dt;
    std::vector<double> dq(S), dv(S);
    for (std::size_t j = 0; j < S; ++j) {
        dq[j] = current.joint_pos[j] - frames[0].joint_pos[j];
        dv[j] = current.joint_vel[j] - frames[0].joint_vel[j];
    }
    const double dx = current.root_pos[0] - frames[0].root_pos[0];
    const double dy = current.root_pos[1] - frames[0].root_pos[1];
    const double dyaw = wrap_angle(quat_yaw(current.root_quat) - quat_yaw(frames[0].root_quat));
    const bool joints_on = std::any_of(dq.begin(), dq.end(), [](double v) { return v != 0.0; }) ||
                           std::any_of(dv.begin(), dv.end(), [](double v) { return v != 0.0; });
    const bool root_on = dx != 0.0 || dy != 0.0 || dyaw != 0.0;

    for (std::size_t k = 1; k < std::min(K, frames.size()); ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(K);
        const double h00 = 2 * s * s * s - 3 * s * s + 1;
        const double h10 = s * s * s - 2 * s * s + s;
        const double dh00 = (6 * s * s - 6 * s) / tau;
        const double dh10 = 3 * s * s - 4 * s + 1;
        RobotState& f = frames[k];
        if (joints_on) {
            for (std::size_t j = 0; j < S; ++j) {
                f.joint_pos[j] += h00 * dq[j] + h10 * tau * dv[j];
                f.joint_vel[j] += dh00 * dq[j] + dh10 * dv[j];
            }
        }
        if (root_on) {
            f.root_pos[0] += h00 * dx;
            f.root_pos[1] += h00 * dy;
            f.root_quat = yaw_to_quat(quat_yaw(f.root_quat) + h00 * dyaw);
        }
    }
    frames[0] = current;
    return MotionSequence(std::move(frames), dt);
}

std::vector<ReferenceWindow> edit_candidates(const RobotState& current, const ReferenceWindow& original_future,
                                             std::size_t n, std::uint64_t seed, const EditOptions& opt) {
    if (n == 0) throw InputError("edit_candidates: n must be >= 1");
    const auto& orig = original_future.states();
    const auto reattach =
        static_cast<std::size_t>(std::llround(opt.reattach_fraction * static_cast<double>(orig.size())));
    std::vector<ReferenceWindow> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto edit = CandidateEdit::sample(i, orig.joints(), seed, opt);
        out.emplace_back(apply_edit(current, orig, edit, opt, reattach), orig.size());
    }
    return out;
}

double root_path_rmse(const MotionSequence& a, const MotionSequence& b) {
    if (a.size() != b.size()) throw ShapeError("root_path_rmse: length mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double ex = a[k].root_pos[0] - b[k].root_pos[0];
        const double ey = a[k].root_pos[1] - b[k].root_pos[1];
        acc += ex * ex + ey * ey;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace saw
