#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "saw/motion.hpp"
#include "saw/nn/adam.hpp"
#include "saw/nn/tape.hpp"
#include "saw/scoring.hpp"

namespace saw {

/// Architecture variants. `kFull` is the complete model; the others remove or
/// rearrange one ingredient.
enum class Variant {
    kFull,         // self-attention over observed states, cross-attention to the reference
    kNoRef,        // observed states only
    kNoObs,        // reference only
    kNoCrossAttn,  // independent self-attention per stream, head on both class tokens
    kInverted,     // self-attention over the reference, cross-attention to observed states
};

inline constexpr Variant kAllVariants[] = {Variant::kFull, Variant::kNoRef, Variant::kNoObs, Variant::kNoCrossAttn,
                                           Variant::kInverted};

std::string_view variant_name(Variant v);
Variant variant_from_name(std::string_view name);

struct SawConfig {
    int S = kDefaultJoints;
    int T_o = 25;
    int T_f = 50;
    int d_model = 64;
    int n_heads = 4;
    int n_self_layers = 2;
    int n_cross_layers = 1;
    int mlp_hidden = 128;
    Variant variant = Variant::kFull;
    int horizon_seconds = 1;
    bool add_pe_to_reference = true;

    /// Default config whose windows match `horizon_s` at timestep dt.
    static SawConfig for_horizon(int horizon_s, double dt = kDefaultDt);

    /// Sizes positive, d_model divisible by n_heads, horizon in {1, 2, 3}.
    void validate() const;
    /// validate() plus T_o == 0.5 s and T_f == horizon_seconds at timestep dt.
    void validate_windows(double dt = kDefaultDt) const;

    std::size_t features() const { return frame_features(static_cast<std::size_t>(S)); }

    friend bool operator==(const SawConfig&, const SawConfig&) = default;
};

nlohmann::json to_json(const SawConfig& c);
SawConfig saw_config_from_json(const nlohmann::json& j, const std::string& where = "saw");

/// Per-feature standardization of flattened frames.
struct InputStats {
    std::vector<double> mean;
    std::vector<double> std;

    static InputStats identity(std::size_t features);
    /// Population statistics over rows of a (rows x features) row-major block.
    static InputStats fit(const std::vector<double>& rows, std::size_t features);
};

/// Network weights plus every statistic needed to run it.
struct SawParams {
    SawConfig config;
    nn::ParamMap weights;
    InputStats obs_input;
    InputStats ref_input;
    NormStats target_norm;
};

/// Random initialization (Glorot-uniform matrices, zero biases, unit LN gains).
/// Statistics start as identity transforms.
SawParams init_params(const SawConfig& config, std::uint64_t seed);

/// Parameter names the variant uses.
std::vector<std::string> parameter_names(const SawConfig& config);

nlohmann::json checkpoint_to_json(const SawParams& p);
SawParams checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const SawParams& p, const std::string& path);
SawParams load_checkpoint(const std::string& path);

/// Flattened, unstandardized frames: one row of 7 + 2S features per frame.
std::vector<double> flatten_frames(const MotionSequence& seq);

/// A batch of (observation, reference) windows as raw feature rows.
struct FeatureBatch {
    std::size_t batch = 0;
    std::vector<double> obs;  // batch * T_o rows
    std::vector<double> ref;  // batch * T_f rows
};

FeatureBatch make_batch(const SawConfig& config, const std::vector<const ObservationWindow*>& obs,
                        const std::vector<const ReferenceWindow*>& ref);

/// Parameters of one forward pass, as tape variables.
struct TapeParams {
    std::map<std::string, nn::Var> vars;
    nn::Var operator[](const std::string& name) const;
};

/// Records every weight on `tape`, as gradient leaves when `trainable`.
TapeParams attach(nn::Tape& tape, const SawParams& params, bool trainable);

/// Per-frame encoders: standardize then MLP. Output (batch * T) x d_model.
nn::Var encode_observed(nn::Tape& tape, const SawParams& params, const TapeParams& vars,
                        const std::vector<double>& obs_rows, std::size_t rows);
nn::Var encode_reference(nn::Tape& tape, const SawParams& params, const TapeParams& vars,
                         const std::vector<double>& ref_rows, std::size_t rows);

/// Network outputs, batch x 6: column 0 the fall logit, then the five
/// standardized regression scores.
nn::Var forward_outputs(nn::Tape& tape, const SawParams& params, const TapeParams& vars, const FeatureBatch& batch);

/// BCE on the fall logit plus MSE on the standardized regression targets
/// (unit weights), averaged over the batch.
nn::Var loss(nn::Var outputs, const std::vector<ScoreVector>& targets, const NormStats& norm);

struct ScorePrediction {
    double fall_logit = 0.0;
    double fall_prob = 0.5;
    std::array<double, ScoreVector::kRegression> standardized{};
    ScoreVector scores;  // de-standardized, regression terms clamped at 0; fall = fall_prob
};

/// Value form of loss() on already computed predictions.
double loss(const std::vector<ScorePrediction>& preds, const std::vector<ScoreVector>& targets,
            const NormStats& norm);

/// Inference on a batch of windows. Pure: safe to call concurrently with the same params.
std::vector<ScorePrediction> forward(const SawParams& params, const std::vector<const ObservationWindow*>& obs,
                                     const std::vector<const ReferenceWindow*>& ref);

ScorePrediction forward(const SawParams& params, const ObservationWindow& obs, const ReferenceWindow& ref);

/// Sinusoidal positional embedding, rows x d: sin on even columns, cos on odd.
nn::Tensor positional_embedding(std::size_t rows, std::size_t d);

}  // namespace saw
