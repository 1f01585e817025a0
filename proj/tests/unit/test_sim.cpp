#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "saw/errors.hpp"
#include "saw/motion_gen.hpp"
#include "saw/sim.hpp"

using namespace saw;

namespace {

MotionSequence hold(const RobotState& pose, std::size_t n) {
    return MotionSequence(std::vector<RobotState>(n, pose));
}

MotionSequence joint_step(const RobotModel& m, double amount, std::size_t n) {
    RobotState s = testing::rest_state(static_cast<std::size_t>(m.S));
    for (auto& q : s.joint_pos) q = amount;
    return hold(s, n);
}

}  // namespace

TEST_CASE("init_state") {
    const RobotModel m = RobotModel::defaults();
    RobotState pose = testing::rest_state(8);
    pose.root_pos[2] = 0.3;
    const SimState s = init_state(m, pose);
    CHECK(s.robot.root_pos[2] == m.h0);
    CHECK_FALSE(s.fallen);
    CHECK(s.height_vel == 0.0);
    CHECK(init_state(m, pose, 7) == init_state(m, pose, 7));
    const SimState a = init_state(m, pose, 7), b = init_state(m, pose, 8);
    CHECK(a.robot.joint_pos != b.robot.joint_pos);
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(std::abs(a.robot.joint_pos[j]) <= 0.05);
        CHECK(std::abs(a.robot.joint_vel[j]) <= 0.05);
    }
    CHECK_THROWS_AS(init_state(m, testing::rest_state(3)), ShapeError);
}

TEST_CASE("tracking the initial pose is a fixed point") {
    const RobotModel m = RobotModel::defaults();
    const RobotState pose = testing::rest_state(8);
    const SimState s0 = init_state(m, pose);
    const RolloutResult r = rollout(m, s0, hold(s0.robot, 1000));
    CHECK_FALSE(r.fall);
    for (std::size_t t = 0; t < r.executed.size(); ++t) {
        CHECK(std::abs(r.executed[t].root_pos[2] - m.h0) < 1e-9);
        for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(r.executed[t].joint_pos[j]) < 1e-9);
    }
}

TEST_CASE("a 2 rad joint step falls and the fall is absorbing") {
    const RobotModel m = RobotModel::defaults();
    const SimState s0 = init_state(m, testing::rest_state(8));
    const RolloutResult r = rollout(m, s0, joint_step(m, 2.0, 150));
    REQUIRE(r.fall);
    REQUIRE(r.fall_frame);
    CHECK(*r.fall_frame < 150);

    SimState s = r.final_state;
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const SimState next = step(m, s, testing::random_state(rng, 8), {rng.normal(), rng.normal()}, 0.02);
        CHECK(next.fallen);
        CHECK(next.fall_frame == s.fall_frame);
        CHECK(next.robot == s.robot);
        CHECK(next.frame == s.frame + 1);
        s = next;
    }
}

TEST_CASE("slow squat is tracked closely") {
    const RobotModel m = RobotModel::defaults();
    std::vector<RobotState> frames;
    for (int t = 0; t < 300; ++t) {
        RobotState s = testing::rest_state(8);
        const double ph = 2 * M_PI * 0.5 * t * 0.02;
        for (std::size_t j = 0; j < 8; ++j) {
            s.joint_pos[j] = 0.3 * std::sin(ph);
            s.joint_vel[j] = 0.3 * 2 * M_PI * 0.5 * std::cos(ph);
        }
        frames.push_back(s);
    }
    const MotionSequence ref(frames);
    const RolloutResult r = rollout(m, init_state(m, ref[0]), ref);
    CHECK_FALSE(r.fall);
    double err = 0;
    for (std::size_t t = 0; t < ref.size(); ++t)
        for (std::size_t j = 0; j < 8; ++j) err += std::abs(ref[t].joint_pos[j] - r.executed[t].joint_pos[j]);
    err /= static_cast<double>(ref.size() * 8);
    CHECK(err < 0.05);
}

TEST_CASE("rollout is deterministic, saturates, and never un-falls") {
    const RobotModel m = RobotModel::defaults();
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        TaskSpec spec;
        spec.family = kAllFamilies[rng.below(6)];
        spec.difficulty = rng.uniform();
        spec.duration_s = rng.uniform(3, 6);
        spec.seed = rng.next_u64();
        const MotionSequence ref = generate_reference(spec);
        const SimState s0 = init_state(m, ref[0], rng.next_u64());
        const RolloutResult a = rollout(m, s0, ref);
        const RolloutResult b = rollout(m, s0, ref);
        CHECK(a.executed == b.executed);
        CHECK(a.final_state == b.final_state);
        CHECK(a.executed.size() == ref.size());

        bool fallen = false;
        SimState s = s0;
        const auto vel = root_velocities(ref);
        for (std::size_t t = 0; t < ref.size(); ++t) {
            s = step(m, s, ref[t], vel[t], ref.dt());
            CHECK((!fallen || s.fallen));
            fallen = s.fallen;
            CHECK(s.robot == a.executed[t]);
            for (std::size_t j = 0; j < 8; ++j) {
                CHECK(std::abs(s.robot.joint_vel[j]) <= m.v_max);
                CHECK(s.robot.joint_pos[j] >= m.joint_lo[j]);
                CHECK(s.robot.joint_pos[j] <= m.joint_hi[j]);
            }
        }
        CHECK(fallen == a.fall);
        if (a.fall) CHECK(a.executed[*a.fall_frame].root_pos[2] < m.h_fall);
    }
}

TEST_CASE("step rejects non-finite references and mismatched joints") {
    const RobotModel m = RobotModel::defaults();
    const SimState s0 = init_state(m, testing::rest_state(8));
    RobotState bad = testing::rest_state(8);
    bad.joint_pos[3] = NAN;
    CHECK_THROWS_AS(step(m, s0, bad, {0, 0}, 0.02), InputError);
    CHECK_THROWS_AS(step(m, s0, testing::rest_state(8), {INFINITY, 0}, 0.02), InputError);
    CHECK_THROWS_AS(step(m, s0, testing::rest_state(5), {0, 0}, 0.02), ShapeError);
    CHECK_THROWS_AS(rollout(m, s0, hold(testing::rest_state(5), 10)), ShapeError);
}

TEST_CASE("RobotModel validation names the field") {
    RobotModel m = RobotModel::defaults();
    m.h_fall = 0.9;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = RobotModel::defaults();
    m.joint_lo[2] = 3.0;
    try {
        m.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("joint_lo") != std::string::npos);
    }
    m = RobotModel::defaults();
    m.kp = -1;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    const RobotModel d = RobotModel::defaults(5);
    const RobotModel back = robot_model_from_json(to_json(d));
    CHECK(back.S == 5);
    CHECK(back.joint_hi == d.joint_hi);
    CHECK(back.k_fall == d.k_fall);
}
