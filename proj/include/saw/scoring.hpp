#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <json.hpp>

#include "saw/motion.hpp"

namespace saw {

/// Six-component score of following a reference: fall plus five regression terms.
struct ScoreVector {
    double fall = 0.0;     // {0,1} ground truth, [0,1] when predicted
    double a_q = 0.0;      // joint-angle MSE, rad^2
    double a_qd = 0.0;     // joint-velocity MSE, rad^2/s^2
    double a_qdd = 0.0;    // mean squared executed joint acceleration, rad^2/s^4
    double a_p = 0.0;      // root-position component MSE, m^2
    double a_theta = 0.0;  // quaternion component MSE

    static constexpr std::size_t kRegression = 5;

    /// [a_q, a_qd, a_qdd, a_p, a_theta]
    std::array<double, kRegression> regression() const { return {a_q, a_qd, a_qdd, a_p, a_theta}; }
    void set_regression(const std::array<double, kRegression>& r);

    friend bool operator==(const ScoreVector&, const ScoreVector&) = default;
};

inline constexpr const char* kRegressionNames[ScoreVector::kRegression] = {"a_q", "a_qd", "a_qdd", "a_p",
                                                                           "a_theta"};

nlohmann::json to_json(const ScoreVector& s);
ScoreVector score_from_json(const nlohmann::json& j, const std::string& where = "score");

/// Per-component mean/std used to standardize the regression terms.
struct NormStats {
    std::array<double, ScoreVector::kRegression> mean{};
    std::array<double, ScoreVector::kRegression> std{1.0, 1.0, 1.0, 1.0, 1.0};

    /// Mean and (population) std over `scores`; stds below 1e-12 are replaced by 1.
    static NormStats fit(const std::vector<ScoreVector>& scores);
};

nlohmann::json to_json(const NormStats& n);
NormStats norm_stats_from_json(const nlohmann::json& j);

struct RankWeights {
    std::array<double, 6> w{10.0, 1.0, 0.1, 0.1, 1.0, 1.0};
    double fall_gate = 0.5;
    double gate_penalty = 1e6;

    void validate() const;
};

nlohmann::json to_json(const RankWeights& w);
RankWeights rank_weights_from_json(const nlohmann::json& j, const std::string& where = "rank_weights");

/// Ground-truth scores of `executed` following `reference`. Needs equal
/// lengths >= 3, equal dt and joint counts.
ScoreVector compute_scores(const MotionSequence& reference, const MotionSequence& executed, bool fall);

/// w . [fall, z_q, z_qd, z_qdd, z_p, z_theta] plus gate_penalty when fall > fall_gate.
/// Lower is better.
double scalarize(const ScoreVector& s, const RankWeights& w, const NormStats& norm);

/// Candidate indices best first: ungated before gated, then by the weighted sum;
/// ties keep input order. Matches sorting by scalarize() while gate_penalty
/// exceeds the spread of the sums.
std::vector<std::size_t> rank_candidates(const std::vector<ScoreVector>& scores, const RankWeights& w,
                                         const NormStats& norm);

}  // namespace saw
