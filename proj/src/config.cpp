#include "saw/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "saw/errors.hpp"
#include "saw/random.hpp"

namespace saw {

using nlohmann::json;

void RunConfig::validate() const {
    robot_model.validate();
    saw.validate_windows(kDefaultDt);
    adapter.validate();
    if (saw.S != robot_model.S) throw ConfigError("saw.S: differs from robot_model.S");
    if (adapter.horizon_s != saw.horizon_seconds) throw ConfigError("adapter.horizon_s: differs from saw.horizon_seconds");
    const auto& s = dataset.split;
    for (double f : {s.train, s.val, s.test}) {
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("dataset.split: fractions must lie in [0, 1]");
    }
    const double total = s.train + s.val + s.test;
    if (std::abs(total - 1.0) > 1e-9) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", total);
        throw ConfigError(std::string("dataset.split: fractions sum to ") + buf + ", expected 1");
    }
    if (dataset.n_specs == 0) throw ConfigError("dataset.n_specs: must be >= 1");
    if (dataset.behaviors_per_ref == 0) throw ConfigError("dataset.behaviors_per_ref: must be >= 1");
    if (dataset.windows_per_rollout == 0) throw ConfigError("dataset.windows_per_rollout: must be >= 1");
    const auto& d = dataset.sampling;
    if (!(0.0 <= d.difficulty_lo && d.difficulty_lo <= d.difficulty_hi && d.difficulty_hi <= 1.0)) {
        throw ConfigError("dataset.difficulty: need 0 <= lo <= hi <= 1");
    }
    if (!(3.0 <= d.duration_lo && d.duration_lo <= d.duration_hi && d.duration_hi <= 12.0)) {
        throw ConfigError("dataset.duration_s: need 3 <= lo <= hi <= 12");
    }
}

json to_json(const RunConfig& c) {
    return json{
        {"robot_model", to_json(c.robot_model)},
        {"saw", to_json(c.saw)},
        {"adapter", to_json(c.adapter)},
        {"dataset",
         {{"n_specs", c.dataset.n_specs},
          {"behaviors_per_ref", c.dataset.behaviors_per_ref},
          {"windows_per_rollout", c.dataset.windows_per_rollout},
          {"split", {{"train", c.dataset.split.train}, {"val", c.dataset.split.val}, {"test", c.dataset.split.test}}},
          {"difficulty", {{"lo", c.dataset.sampling.difficulty_lo}, {"hi", c.dataset.sampling.difficulty_hi}}},
          {"duration_s", {{"lo", c.dataset.sampling.duration_lo}, {"hi", c.dataset.sampling.duration_hi}}}}},
        {"train", to_json(c.train)},
        {"seed", c.seed},
        {"threads", c.threads}};
}

namespace {

void read_range(const json& j, const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const std::string where = std::string("dataset.") + key;
    const auto& r = j[key];
    if (!r.is_object()) throw ConfigError(where + ": expected {lo, hi}");
    for (auto [name, dst] : {std::pair{"lo", &lo}, std::pair{"hi", &hi}}) {
        if (!r.contains(name)) continue;
        if (!r[name].is_number()) throw ConfigError(where + "." + name + ": expected number");
        *dst = r[name].get<double>();
    }
}

void read_count(const json& j, const std::string& where, const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 0) {
        throw ConfigError(where + "." + key + ": expected non-negative integer");
    }
    dst = j[key].get<std::size_t>();
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    static const char* kKnown[] = {"robot_model", "saw", "adapter", "dataset", "train", "seed", "threads"};
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) { return key == k; }) ==
            std::end(kKnown)) {
            throw ConfigError(key + ": unknown config field");
        }
    }
    RunConfig c;
    if (j.contains("robot_model")) c.robot_model = robot_model_from_json(j["robot_model"], "robot_model");
    if (j.contains("saw")) c.saw = saw_config_from_json(j["saw"], "saw");
    c.adapter.horizon_s = c.saw.horizon_seconds;
    if (j.contains("adapter")) {
        json a = j["adapter"];
        if (a.is_object() && !a.contains("horizon_s")) a["horizon_s"] = c.saw.horizon_seconds;
        c.adapter = adapter_config_from_json(a, "adapter");
    }
    if (j.contains("train")) c.train = train_options_from_json(j["train"], "train");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: expected non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("threads")) {
        std::size_t t = 1;
        read_count(j, "config", "threads", t);
        c.threads = static_cast<unsigned>(t);
    }
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        if (!d.is_object()) throw ConfigError("dataset: expected object");
        read_count(d, "dataset", "n_specs", c.dataset.n_specs);
        read_count(d, "dataset", "behaviors_per_ref", c.dataset.behaviors_per_ref);
        read_count(d, "dataset", "windows_per_rollout", c.dataset.windows_per_rollout);
        if (d.contains("split")) {
            const auto& s = d["split"];
            if (!s.is_object()) throw ConfigError("dataset.split: expected {train, val, test}");
            for (auto [name, dst] : {std::pair{"train", &c.dataset.split.train}, std::pair{"val", &c.dataset.split.val},
                                     std::pair{"test", &c.dataset.split.test}}) {
                if (!s.contains(name)) continue;
                if (!s[name].is_number()) throw ConfigError(std::string("dataset.split.") + name + ": expected number");
                *dst = s[name].get<double>();
            }
        }
        read_range(d, "difficulty", c.dataset.sampling.difficulty_lo, c.dataset.sampling.difficulty_hi);
        read_range(d, "duration_s", c.dataset.sampling.duration_lo, c.dataset.sampling.duration_hi);
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::optional<std::string>& path) {
    std::optional<std::string> file = path;
    if (!file) {
        if (const char* env = std::getenv("SAW_CONFIG"); env && *env) file = env;
    }
    if (!file) {
        RunConfig c;
        c.validate();
        return c;
    }
    std::ifstream in(*file);
    if (!in) throw IoError("cannot read config '" + *file + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + *file + "': " + e.what());
    }
    return run_config_from_json(j);
}

DatasetSplits build_splits(const RunConfig& config, int horizon_s) {
    const auto& dc = config.dataset;
    const auto specs = sample_specs(dc.n_specs, derive_seed(config.seed, "gen-data"), dc.sampling);
    const auto n_train = static_cast<std::size_t>(std::llround(dc.split.train * static_cast<double>(specs.size())));
    const auto n_val = std::min(specs.size() - n_train,
                                static_cast<std::size_t>(std::llround(dc.split.val * static_cast<double>(specs.size()))));
    DatasetOptions opt;
    opt.behaviors_per_ref = dc.behaviors_per_ref;
    opt.windows_per_rollout = dc.windows_per_rollout;
    opt.horizon_s = horizon_s;
    opt.robot = config.robot_model;
    opt.generator.joints = config.robot_model.S;
    opt.threads = config.threads;

    auto part = [&](std::size_t lo, std::size_t hi) {
        const std::vector<TaskSpec> sub(specs.begin() + static_cast<std::ptrdiff_t>(lo),
                                        specs.begin() + static_cast<std::ptrdiff_t>(hi));
        if (sub.empty()) return BuiltDataset{};
        return build_dataset(sub, opt);
    };
    BuiltDataset tr = part(0, n_train);
    BuiltDataset va = part(n_train, n_train + n_val);
    BuiltDataset te = part(n_train + n_val, specs.size());
    DatasetSplits out;
    out.train_raw = tr.stats;
    out.val_raw = va.stats;
    out.test_raw = te.stats;
    out.train = std::move(tr.records);
    out.val = rebalance(va.records, derive_seed(config.seed, "rebalance-val"));
    out.test = rebalance(te.records, derive_seed(config.seed, "rebalance-test"));
    return out;
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

}  // namespace saw
