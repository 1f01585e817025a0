#include "saw/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "saw/errors.hpp"

namespace saw {

using nlohmann::json;

void ScoreVector::set_regression(const std::array<double, kRegression>& r) {
    a_q = r[0];
    a_qd = r[1];
    a_qdd = r[2];
    a_p = r[3];
    a_theta = r[4];
}

json to_json(const ScoreVector& s) {
    return json{{"fall", s.fall}, {"a_q", s.a_q}, {"a_qd", s.a_qd},
                {"a_qdd", s.a_qdd}, {"a_p", s.a_p}, {"a_theta", s.a_theta}};
}

ScoreVector score_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected object");
    ScoreVector s;
    auto get = [&](const char* key) {
        const auto it = j.find(key);
        if (it == j.end() || !it->is_number()) throw ParseError(where + "." + key + ": missing or not a number");
        return it->get<double>();
    };
    s.fall = get("fall");
    s.a_q = get("a_q");
    s.a_qd = get("a_qd");
    s.a_qdd = get("a_qdd");
    s.a_p = get("a_p");
    s.a_theta = get("a_theta");
    return s;
}

NormStats NormStats::fit(const std::vector<ScoreVector>& scores) {
    NormStats n;
    if (scores.empty()) return n;
    const double count = static_cast<double>(scores.size());
    for (const auto& s : scores) {
        const auto r = s.regression();
        for (std::size_t i = 0; i < r.size(); ++i) n.mean[i] += r[i];
    }
    for (auto& m : n.mean) m /= count;
    std::array<double, ScoreVector::kRegression> var{};
    for (const auto& s : scores) {
        const auto r = s.regression();
        for (std::size_t i = 0; i < r.size(); ++i) var[i] += (r[i] - n.mean[i]) * (r[i] - n.mean[i]);
    }
    for (std::size_t i = 0; i < var.size(); ++i) {
        const double sd = std::sqrt(var[i] / count);
        n.std[i] = sd > 1e-12 ? sd : 1.0;
    }
    return n;
}

json to_json(const NormStats& n) { return json{{"mean", n.mean}, {"std", n.std}}; }

NormStats norm_stats_from_json(const json& j) {
    NormStats n;
    try {
        n.mean = j.at("mean").get<std::array<double, ScoreVector::kRegression>>();
        n.std = j.at("std").get<std::array<double, ScoreVector::kRegression>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("norm stats: ") + e.what());
    }
    return n;
}

void RankWeights::validate() const {
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("rank_weights.w: must be non-negative and finite");
    }
    if (!(fall_gate >= 0.0 && fall_gate <= 1.0)) throw ConfigError("rank_weights.fall_gate: must be in [0, 1]");
    if (!(gate_penalty > 0.0)) throw ConfigError("rank_weights.gate_penalty: must be positive");
}

json to_json(const RankWeights& w) {
    return json{{"w", w.w}, {"fall_gate", w.fall_gate}, {"gate_penalty", w.gate_penalty}};
}

RankWeights rank_weights_from_json(const json& j, const std::string& where) {
    RankWeights w;
    try {
        if (j.contains("w")) w.w = j["w"].get<std::array<double, 6>>();
        if (j.contains("fall_gate")) w.fall_gate = j["fall_gate"].get<double>();
        if (j.contains("gate_penalty")) w.gate_penalty = j["gate_penalty"].get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    w.validate();
    return w;
}

ScoreVector compute_scores(const MotionSequence& reference, const MotionSequence& executed, bool fall) {
    const std::size_t n = reference.size();
    if (executed.size() != n) {
        throw ShapeError("compute_scores: reference has " + std::to_string(n) + " frames, executed " +
                         std::to_string(executed.size()));
    }
    if (n < 3) throw ShapeError("compute_scores: need at least 3 frames for accelerations");
    if (reference.dt() != executed.dt()) throw ShapeError("compute_scores: dt mismatch");
    const std::size_t S = reference.joints();
    if (executed.joints() != S) throw ShapeError("compute_scores: joint dimension mismatch");

    double sq = 0.0, sqd = 0.0, sp = 0.0, sth = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const RobotState& r = reference[t];
        const RobotState& e = executed[t];
        for (std::size_t j = 0; j < S; ++j) {
            const double dq = r.joint_pos[j] - e.joint_pos[j];
            const double dv = r.joint_vel[j] - e.joint_vel[j];
            sq += dq * dq;
            sqd += dv * dv;
        }
        for (std::size_t k = 0; k < 3; ++k) {
            const double dp = r.root_pos[k] - e.root_pos[k];
            sp += dp * dp;
        }
        // Sequences store canonical quaternions already.
        const Quat& a = r.root_quat;
        const Quat& b = e.root_quat;
        sth += (a.w - b.w) * (a.w - b.w) + (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
               (a.z - b.z) * (a.z - b.z);
    }
    double sacc = 0.0;
    for (const auto& row : finite_diff(executed, 2)) {
        for (double a : row) sacc += a * a;
    }
    const double frames = static_cast<double>(n);
    const double per_joint = frames * static_cast<double>(S);
    ScoreVector s;
    s.fall = fall ? 1.0 : 0.0;
    s.a_q = sq / per_joint;
    s.a_qd = sqd / per_joint;
    s.a_qdd = sacc / per_joint;
    s.a_p = sp / (3.0 * frames);
    s.a_theta = sth / (4.0 * frames);
    return s;
}

namespace {

double weighted_sum(const ScoreVector& s, const RankWeights& w, const NormStats& norm) {
    const auto r = s.regression();
    if (!std::isfinite(s.fall)) throw InputError("scalarize: non-finite fall score");
    double acc = w.w[0] * s.fall;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!std::isfinite(r[i])) throw InputError(std::string("scalarize: non-finite ") + kRegressionNames[i]);
        if (!(norm.std[i] > 0.0)) throw InputError("scalarize: normalization std must be positive");
        acc += w.w[i + 1] * (r[i] - norm.mean[i]) / norm.std[i];
    }
    return acc;
}

}  // namespace

double scalarize(const ScoreVector& s, const RankWeights& w, const NormStats& norm) {
    const double acc = weighted_sum(s, w, norm);
    return s.fall > w.fall_gate ? acc + w.gate_penalty : acc;
}

std::vector<std::size_t> rank_candidates(const std::vector<ScoreVector>& scores, const RankWeights& w,
                                         const NormStats& norm) {
    if (scores.empty()) throw InputError("rank_candidates: empty candidate list");
    // Sorted on (gated, weighted sum): the same order as scalarize() whenever the
    // penalty exceeds the spread of the sums, and exactly scale-invariant in w.
    std::vector<std::pair<bool, double>> key(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        key[i] = {scores[i].fall > w.fall_gate, weighted_sum(scores[i], w, norm)};
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    return order;
}

}  // namespace saw
