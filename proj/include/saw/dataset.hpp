#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "saw/motion.hpp"
#include "saw/motion_gen.hpp"
#include "saw/scoring.hpp"
#include "saw/sim.hpp"

namespace saw {

struct RecordMeta {
    Family family = Family::kStand;
    double difficulty = 0.0;
    std::uint64_t seed = 0;     // task seed
    std::size_t behavior = 0;   // which jittered initial state
    std::size_t t_index = 0;    // first reference frame; observation is [t - T_o, t)
    int horizon_s = 1;
};

/// One training example: what the robot did, what it is asked to do next, and
/// how that went.
struct DatasetRecord {
    ObservationWindow observation;
    ReferenceWindow reference;
    ScoreVector target;
    RecordMeta meta;
};

struct DatasetOptions {
    std::size_t behaviors_per_ref = 3;
    std::size_t windows_per_rollout = 3;
    int horizon_s = 1;
    double observe_s = 0.5;
    RobotModel robot = RobotModel::defaults();
    GeneratorOptions generator;
    unsigned threads = 1;  // 0: hardware concurrency

    std::size_t obs_frames() const;
    std::size_t ref_frames() const;
};

struct FamilyStats {
    std::size_t count = 0;
    std::size_t falls = 0;
};

struct DatasetStats {
    std::size_t count = 0;
    double fall_fraction = 0.0;
    std::map<std::string, FamilyStats> per_family;
    std::size_t skipped_specs = 0;  // too short for one window
};

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records, std::size_t skipped_specs = 0);
nlohmann::json to_json(const DatasetStats& s);

struct BuiltDataset {
    std::vector<DatasetRecord> records;  // ordered by spec, behavior, window
    DatasetStats stats;
};

/// Records of one spec: behaviors_per_ref jittered rollouts of its reference,
/// windows_per_rollout windows each. Window starts t are drawn uniformly from
/// [T_o, min(len - T_f, fall_frame)], so no window starts after a fall.
/// Returns an empty vector when the reference is shorter than T_o + T_f.
std::vector<DatasetRecord> records_for_spec(const TaskSpec& spec, const DatasetOptions& opt);

/// records_for_spec over every spec (in parallel), concatenated in spec order.
BuiltDataset build_dataset(const std::vector<TaskSpec>& specs, const DatasetOptions& opt);

/// Subsamples the majority class down to the minority count so falls make up
/// exactly half. The kept majority records are spread over families in
/// proportion to their share; order of the input is preserved.
std::vector<DatasetRecord> rebalance(const std::vector<DatasetRecord>& records, std::uint64_t seed);

struct SpecSampling {
    double difficulty_lo = 0.0;
    double difficulty_hi = 1.0;
    double duration_lo = 3.0;
    double duration_hi = 12.0;
};

/// n task specs with uniformly drawn family, difficulty and duration; spec i
/// depends only on (seed, i).
std::vector<TaskSpec> sample_specs(std::size_t n, std::uint64_t seed, const SpecSampling& sampling = {});

nlohmann::json record_to_json(const DatasetRecord& r);
/// `where` prefixes error messages, e.g. "data.jsonl:12".
DatasetRecord record_from_json(const nlohmann::json& j, std::size_t T_o, std::size_t T_f,
                               const std::string& where);

/// One record per line. Throws IoError when the file cannot be written.
void write_jsonl(const std::string& path, const std::vector<DatasetRecord>& records);
/// Window lengths are taken from the first record and enforced on the rest.
/// Malformed lines throw ParseError naming the line number.
std::vector<DatasetRecord> read_jsonl(const std::string& path);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace saw
