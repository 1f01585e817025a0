#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "saw/adapter.hpp"
#include "saw/dataset.hpp"
#include "saw/model.hpp"
#include "saw/sim.hpp"
#include "saw/train.hpp"

namespace saw {

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct DatasetConfig {
    std::size_t n_specs = 1200;
    std::size_t behaviors_per_ref = 3;
    std::size_t windows_per_rollout = 3;
    SplitFractions split;
    SpecSampling sampling;  // difficulty and duration ranges
};

/// Everything one experiment needs. Every field has a default, so `{}` is a
/// valid config file.
struct RunConfig {
    RobotModel robot_model = RobotModel::defaults();
    SawConfig saw;
    AdapterConfig adapter;
    DatasetConfig dataset;
    TrainOptions train;
    std::uint64_t seed = 0;
    unsigned threads = 1;  // workers for gen-data and adapt; 0 = all cores

    /// Cross-field checks: joint counts agree, horizons agree, splits sum to 1.
    void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Errors name the offending field, e.g. "dataset.split: fractions sum to 0.9, expected 1".
RunConfig run_config_from_json(const nlohmann::json& j);

/// Reads `path` if given, else the file named by SAW_CONFIG, else defaults.
RunConfig load_run_config(const std::optional<std::string>& path);

struct DatasetSplits {
    std::vector<DatasetRecord> train, val, test;  // val and test rebalanced to 50% falls
    DatasetStats train_raw, val_raw, test_raw;    // before rebalancing
};

/// Samples dataset.n_specs task specs from the root seed, assigns them to
/// train/val/test by the split fractions (whole specs, so no task appears in
/// two splits) and builds each split at `horizon_s`.
DatasetSplits build_splits(const RunConfig& config, int horizon_s);

/// Stable 64-bit FNV-1a hex digest of a file's bytes.
std::string file_hash(const std::string& path);

}  // namespace saw
