#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "saw/dataset.hpp"
#include "saw/model.hpp"
#include "saw/nn/adam.hpp"

namespace saw {

struct TrainOptions {
    nn::AdamOptions adam;
    std::size_t batch_size = 64;
    int max_epochs = 100;
    int patience = 10;         // epochs without a new best val fall accuracy
    std::size_t max_steps = 0;  // 0: unlimited
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const TrainOptions& o);
TrainOptions train_options_from_json(const nlohmann::json& j, const std::string& where = "train");

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;  // mean over the epoch's batches
    double val_loss = 0.0;
    double val_fall_accuracy = 0.0;
};

struct TrainResult {
    SawParams params;  // weights of the best epoch
    std::vector<EpochLog> log;
    std::vector<double> step_losses;
    int best_epoch = -1;
    double best_val_fall_accuracy = 0.0;
};

nlohmann::json to_json(const TrainResult& r);

/// Adam on BCE + standardized MSE. Input and target statistics are fitted on
/// `train_set` and stored in the returned params. Early stopping on val fall
/// accuracy; with an empty `val_set` the last epoch is kept. Deterministic in
/// options.seed. Throws InputError on an empty train set, ConfigError when
/// record windows do not match the config, NumericError on a non-finite loss.
TrainResult train(const SawConfig& config, const std::vector<DatasetRecord>& train_set,
                  const std::vector<DatasetRecord>& val_set, const TrainOptions& options);

struct EvalMetrics {
    std::size_t count = 0;
    double fall_accuracy = 0.0;  // fraction in [0, 1]; fall predicted when fall_prob > 0.5
    std::array<double, ScoreVector::kRegression> mse{};  // raw units
    double loss = 0.0;
};

/// Throws InputError on an empty dataset and ConfigError on a window mismatch.
EvalMetrics evaluate(const SawParams& params, const std::vector<DatasetRecord>& records,
                     std::size_t batch_size = 256);

/// {fall_accuracy, mse: {a_q, ...}, variant, horizon_s, count}; accuracy in percent.
nlohmann::json metrics_row(const EvalMetrics& m, Variant variant, int horizon_s);

/// Window lengths and horizon of every record must match the config.
void check_records(const SawConfig& config, const std::vector<DatasetRecord>& records, const char* what);

}  // namespace saw
