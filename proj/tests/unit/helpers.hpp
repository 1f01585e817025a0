#pragma once

#include <cmath>
#include <vector>

#include "saw/motion.hpp"
#include "saw/random.hpp"
#include "saw/scoring.hpp"

namespace testing {

inline saw::RobotState random_state(saw::Rng& rng, std::size_t S, double scale = 1.0) {
    saw::RobotState s;
    s.root_pos = {rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(0.3, 1.0)};
    s.root_quat = saw::quat_canonicalize({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    for (std::size_t i = 0; i < S; ++i) {
        s.joint_pos.push_back(rng.uniform(-scale, scale));
        s.joint_vel.push_back(rng.uniform(-5 * scale, 5 * scale));
    }
    return s;
}

inline saw::MotionSequence random_sequence(saw::Rng& rng, std::size_t n, std::size_t S, double dt = 0.02) {
    std::vector<saw::RobotState> frames;
    for (std::size_t i = 0; i < n; ++i) frames.push_back(random_state(rng, S));
    return saw::MotionSequence(std::move(frames), dt);
}

inline saw::RobotState rest_state(std::size_t S) {
    saw::RobotState s;
    s.root_pos = {0.0, 0.0, 0.8};
    s.joint_pos.assign(S, 0.0);
    s.joint_vel.assign(S, 0.0);
    return s;
}

// Naive recomputation of the ground-truth scores, written independently of
// compute_scores: explicit loops, explicit stencils.
inline saw::ScoreVector brute_force_scores(const saw::MotionSequence& ref, const saw::MotionSequence& exe, bool fall) {
    const std::size_t T = ref.size();
    const std::size_t S = ref.joints();
    const double dt = ref.dt();
    double sq = 0, sqd = 0, sqdd = 0, sp = 0, sth = 0;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < S; ++j) {
            const double dq = ref[t].joint_pos[j] - exe[t].joint_pos[j];
            const double dv = ref[t].joint_vel[j] - exe[t].joint_vel[j];
            sq += dq * dq;
            sqd += dv * dv;
            double acc;
            auto q = [&](std::size_t k) { return exe[k].joint_pos[j]; };
            if (t == 0) {
                acc = (q(2) - 2 * q(1) + q(0)) / (dt * dt);
            } else if (t == T - 1) {
                acc = (q(T - 1) - 2 * q(T - 2) + q(T - 3)) / (dt * dt);
            } else {
                acc = (q(t + 1) - 2 * q(t) + q(t - 1)) / (dt * dt);
            }
            sqdd += acc * acc;
        }
        for (int k = 0; k < 3; ++k) {
            const double d = ref[t].root_pos[k] - exe[t].root_pos[k];
            sp += d * d;
        }
        const saw::Quat a = saw::quat_canonicalize(ref[t].root_quat);
        const saw::Quat b = saw::quat_canonicalize(exe[t].root_quat);
        const double dw = a.w - b.w, dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
        sth += dw * dw + dx * dx + dy * dy + dz * dz;
    }
    saw::ScoreVector s;
    s.fall = fall ? 1.0 : 0.0;
    const double TS = static_cast<double>(T * S);
    s.a_q = sq / TS;
    s.a_qd = sqd / TS;
    s.a_qdd = sqdd / TS;
    s.a_p = sp / (3.0 * static_cast<double>(T));
    s.a_theta = sth / (4.0 * static_cast<double>(T));
    return s;
}

inline double max_abs_diff(const saw::ScoreVector& a, const saw::ScoreVector& b) {
    double m = std::abs(a.fall - b.fall);
    const auto ra = a.regression();
    const auto rb = b.regression();
    for (std::size_t i = 0; i < ra.size(); ++i) m = std::max(m, std::abs(ra[i] - rb[i]));
    return m;
}

}  // namespace testing
