#include "saw/motion.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "saw/errors.hpp"

namespace saw {

using nlohmann::json;

Quat quat_canonicalize(const Quat& q) {
    const double n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
    if (!std::isfinite(n2) || !(n2 > 0.0)) {
        throw InputError("invalid quaternion: zero or non-finite norm");
    }
    Quat r = q;
    const double n = std::sqrt(n2);
    // Already-normalized input is left untouched so that f(f(q)) == f(q) exactly.
    if (std::abs(n - 1.0) > 1e-15) {
        r = {q.w / n, q.x / n, q.y / n, q.z / n};
    }
    double lead = r.w;
    if (lead == 0.0) lead = r.x;
    if (lead == 0.0) lead = r.y;
    if (lead == 0.0) lead = r.z;
    if (lead < 0.0) r = {-r.w, -r.x, -r.y, -r.z};
    // +0.0 clears negative zeros.
    return {r.w + 0.0, r.x + 0.0, r.y + 0.0, r.z + 0.0};
}

Quat yaw_to_quat(double yaw) {
    return quat_canonicalize({std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw)});
}

double quat_yaw(const Quat& q) {
    return std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z));
}

double wrap_angle(double a) {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    a = std::fmod(a + std::numbers::pi, kTwoPi);
    if (a <= 0.0) a += kTwoPi;
    return a - std::numbers::pi;
}

void flatten_state(const RobotState& s, std::vector<double>& out) {
    out.insert(out.end(), s.root_pos.begin(), s.root_pos.end());
    out.push_back(s.root_quat.w);
    out.push_back(s.root_quat.x);
    out.push_back(s.root_quat.y);
    out.push_back(s.root_quat.z);
    out.insert(out.end(), s.joint_pos.begin(), s.joint_pos.end());
    out.insert(out.end(), s.joint_vel.begin(), s.joint_vel.end());
}

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

MotionSequence::MotionSequence(std::vector<RobotState> frames, double dt)
    : frames_(std::move(frames)), dt_(dt) {
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InputError("sequence dt must be positive");
    if (frames_.empty()) throw InputError("sequence must have at least one frame");
    const std::size_t s = frames_.front().joints();
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        auto& f = frames_[i];
        if (f.joint_pos.size() != s || f.joint_vel.size() != s) {
            throw ShapeError("frame " + std::to_string(i) + ": joint dimension differs from frame 0 (" +
                             std::to_string(s) + ")");
        }
        if (!all_finite(f.joint_pos) || !all_finite(f.joint_vel) || !std::isfinite(f.root_pos[0]) ||
            !std::isfinite(f.root_pos[1]) || !std::isfinite(f.root_pos[2])) {
            throw InputError("frame " + std::to_string(i) + ": non-finite value");
        }
        f.root_quat = quat_canonicalize(f.root_quat);
    }
}

ObservationWindow::ObservationWindow(MotionSequence states, std::size_t expected_len)
    : states_(std::move(states)) {
    if (states_.size() != expected_len) {
        throw ShapeError("observation window has " + std::to_string(states_.size()) +
                         " frames, expected " + std::to_string(expected_len));
    }
}

ReferenceWindow::ReferenceWindow(MotionSequence states, std::size_t expected_len)
    : states_(std::move(states)) {
    if (states_.size() != expected_len) {
        throw ShapeError("reference window has " + std::to_string(states_.size()) +
                         " frames, expected " + std::to_string(expected_len));
    }
}

std::vector<std::vector<double>> finite_diff(const MotionSequence& seq, int order) {
    if (order != 1 && order != 2) throw InputError("finite_diff order must be 1 or 2");
    const std::size_t n = seq.size();
    if (n < static_cast<std::size_t>(order) + 1) {
        throw ShapeError("finite_diff order " + std::to_string(order) + " needs at least " +
                         std::to_string(order + 1) + " frames, got " + std::to_string(n));
    }
    const std::size_t s = seq.joints();
    const double h = seq.dt();
    std::vector<std::vector<double>> out(n, std::vector<double>(s));
    auto q = [&](std::size_t t, std::size_t j) { return seq[t].joint_pos[j]; };
    for (std::size_t j = 0; j < s; ++j) {
        if (order == 1) {
            out[0][j] = (q(1, j) - q(0, j)) / h;
            out[n - 1][j] = (q(n - 1, j) - q(n - 2, j)) / h;
            for (std::size_t t = 1; t + 1 < n; ++t) out[t][j] = (q(t + 1, j) - q(t - 1, j)) / (2.0 * h);
        } else {
            const double h2 = h * h;
            for (std::size_t t = 1; t + 1 < n; ++t) {
                out[t][j] = (q(t + 1, j) - 2.0 * q(t, j) + q(t - 1, j)) / h2;
            }
            // One-sided second differences on the three nearest frames.
            out[0][j] = (q(2, j) - 2.0 * q(1, j) + q(0, j)) / h2;
            out[n - 1][j] = (q(n - 1, j) - 2.0 * q(n - 2, j) + q(n - 3, j)) / h2;
        }
    }
    return out;
}

MotionSequence slice_window(const MotionSequence& seq, std::size_t start, std::size_t len) {
    if (len == 0 || start > seq.size() || len > seq.size() - start) {
        throw BoundsError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                          ") out of range for sequence of length " + std::to_string(seq.size()));
    }
    const auto first = seq.frames().begin() + static_cast<std::ptrdiff_t>(start);
    return MotionSequence({first, first + static_cast<std::ptrdiff_t>(len)}, seq.dt());
}

MotionSequence slice_clamped(const MotionSequence& seq, std::size_t start, std::size_t len) {
    if (len == 0) throw BoundsError("slice length must be positive");
    std::vector<RobotState> frames;
    frames.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
        frames.push_back(seq[std::min(start + i, seq.size() - 1)]);
    }
    return MotionSequence(std::move(frames), seq.dt());
}

// ---------------------------------------------------------------------------
// JSON records

json state_to_json(const RobotState& s) {
    return json{{"p", s.root_pos},
                {"quat", {s.root_quat.w, s.root_quat.x, s.root_quat.y, s.root_quat.z}},
                {"q", s.joint_pos},
                {"qd", s.joint_vel}};
}

namespace {

std::vector<double> number_array(const json& j, const char* key, const std::string& where,
                                 std::size_t expected = 0) {
    const std::string path = where + "." + key;
    const auto it = j.find(key);
    if (it == j.end()) throw ParseError(path + ": missing field");
    if (!it->is_array()) throw ParseError(path + ": expected array");
    std::vector<double> out;
    out.reserve(it->size());
    for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& v = (*it)[i];
        if (!v.is_number()) throw ParseError(path + "[" + std::to_string(i) + "]: expected number");
        out.push_back(v.get<double>());
    }
    if (expected != 0 && out.size() != expected) {
        throw ParseError(path + ": expected " + std::to_string(expected) + " values, got " +
                         std::to_string(out.size()));
    }
    return out;
}

}  // namespace

RobotState state_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected object");
    RobotState s;
    const auto p = number_array(j, "p", where, 3);
    s.root_pos = {p[0], p[1], p[2]};
    const auto q = number_array(j, "quat", where, 4);
    try {
        s.root_quat = quat_canonicalize({q[0], q[1], q[2], q[3]});
    } catch (const InputError&) {
        throw ParseError(where + ".quat: zero-norm quaternion");
    }
    s.joint_pos = number_array(j, "q", where);
    s.joint_vel = number_array(j, "qd", where, s.joint_pos.size());
    return s;
}

json sequence_to_json(const MotionSequence& seq) {
    json frames = json::array();
    for (const auto& f : seq.frames()) frames.push_back(state_to_json(f));
    return json{{"dt", seq.dt()}, {"frames", std::move(frames)}};
}

MotionSequence sequence_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected sequence object");
    const auto dt_it = j.find("dt");
    if (dt_it == j.end() || !dt_it->is_number()) throw ParseError(where + ".dt: missing or not a number");
    const auto fr_it = j.find("frames");
    if (fr_it == j.end() || !fr_it->is_array() || fr_it->empty()) {
        throw ParseError(where + ".frames: missing or empty array");
    }
    std::vector<RobotState> frames;
    frames.reserve(fr_it->size());
    for (std::size_t i = 0; i < fr_it->size(); ++i) {
        const std::string path = where + ".frames[" + std::to_string(i) + "]";
        frames.push_back(state_from_json((*fr_it)[i], path));
        if (frames.back().joints() != frames.front().joints()) {
            throw ParseError(path + ".q: joint dimension " + std::to_string(frames.back().joints()) +
                             " differs from frame 0 (" + std::to_string(frames.front().joints()) + ")");
        }
    }
    try {
        return MotionSequence(std::move(frames), dt_it->get<double>());
    } catch (const Error& e) {
        throw ParseError(where + ": " + e.what());
    }
}

std::string serialize_sequence(const MotionSequence& seq) { return sequence_to_json(seq).dump(); }

MotionSequence deserialize_sequence(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("sequence record: ") + e.what());
    }
    return sequence_from_json(j, "sequence");
}

}  // namespace saw
