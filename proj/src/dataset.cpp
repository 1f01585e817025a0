#include "saw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "saw/errors.hpp"
#include "saw/parallel.hpp"
#include "saw/random.hpp"

namespace saw {

using nlohmann::json;

std::size_t DatasetOptions::obs_frames() const {
    return static_cast<std::size_t>(std::lround(observe_s / generator.dt));
}

std::size_t DatasetOptions::ref_frames() const {
    return static_cast<std::size_t>(std::lround(horizon_s / generator.dt));
}

std::vector<DatasetRecord> records_for_spec(const TaskSpec& spec, const DatasetOptions& opt) {
    const std::size_t To = opt.obs_frames();
    const std::size_t Tf = opt.ref_frames();
    const MotionSequence ref = generate_reference(spec, opt.generator);
    std::vector<DatasetRecord> out;
    if (ref.size() < To + Tf) return out;
    const auto root_vel = root_velocities(ref);

    for (std::size_t b = 0; b < opt.behaviors_per_ref; ++b) {
        const SimState init = init_state(opt.robot, ref.front(), derive_seed(spec.seed, "behavior", b));
        const RolloutResult run = rollout(opt.robot, init, ref, root_vel);
        std::size_t t_hi = ref.size() - Tf;
        if (run.fall_frame) t_hi = std::min(t_hi, *run.fall_frame);
        if (t_hi < To) continue;  // fell while still inside the first observation window

        Rng rng(derive_seed(spec.seed, "windows", b));
        for (std::size_t w = 0; w < opt.windows_per_rollout; ++w) {
            const std::size_t t = To + static_cast<std::size_t>(rng.below(t_hi - To + 1));
            const MotionSequence executed = slice_window(run.executed, t, Tf);
            const MotionSequence future = slice_window(ref, t, Tf);
            const bool fell = run.fall_frame && *run.fall_frame < t + Tf;
            DatasetRecord rec{ObservationWindow(slice_window(run.executed, t - To, To), To),
                              ReferenceWindow(future, Tf), compute_scores(future, executed, fell),
                              RecordMeta{spec.family, spec.difficulty, spec.seed, b, t, opt.horizon_s}};
            out.push_back(std::move(rec));
        }
    }
    return out;
}

BuiltDataset build_dataset(const std::vector<TaskSpec>& specs, const DatasetOptions& opt) {
    if (specs.empty()) throw InputError("build_dataset: no task specs");
    std::vector<std::vector<DatasetRecord>> per_spec(specs.size());
    parallel_for(specs.size(), opt.threads, [&](std::size_t i) { per_spec[i] = records_for_spec(specs[i], opt); });
    BuiltDataset ds;
    std::size_t skipped = 0;
    for (auto& recs : per_spec) {
        if (recs.empty()) ++skipped;
        for (auto& r : recs) ds.records.push_back(std::move(r));
    }
    ds.stats = dataset_stats(ds.records, skipped);
    return ds;
}

DatasetStats dataset_stats(const std::vector<DatasetRecord>& records, std::size_t skipped_specs) {
    DatasetStats s;
    s.count = records.size();
    s.skipped_specs = skipped_specs;
    std::size_t falls = 0;
    for (const auto& r : records) {
        auto& fam = s.per_family[std::string(family_name(r.meta.family))];
        ++fam.count;
        if (r.target.fall > 0.5) {
            ++fam.falls;
            ++falls;
        }
    }
    s.fall_fraction = s.count ? static_cast<double>(falls) / static_cast<double>(s.count) : 0.0;
    return s;
}

json to_json(const DatasetStats& s) {
    json fams = json::object();
    for (const auto& [name, f] : s.per_family) {
        fams[name] = {{"count", f.count},
                      {"falls", f.falls},
                      {"fall_fraction", f.count ? static_cast<double>(f.falls) / static_cast<double>(f.count) : 0.0}};
    }
    return json{{"count", s.count},
                {"fall_fraction", s.fall_fraction},
                {"per_family", std::move(fams)},
                {"skipped_specs", s.skipped_specs}};
}

std::vector<DatasetRecord> rebalance(const std::vector<DatasetRecord>& records, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < records.size(); ++i) (records[i].target.fall > 0.5 ? pos : neg).push_back(i);
    const std::size_t keep = std::min(pos.size(), neg.size());
    std::vector<std::size_t>& major = pos.size() > neg.size() ? pos : neg;
    std::vector<std::size_t> kept = pos.size() > neg.size() ? neg : pos;

    // Per-family quota of the majority class: floor of the proportional share,
    // then the largest remainders (ties to the lower family index).
    std::map<Family, std::vector<std::size_t>> groups;
    for (std::size_t i : major) groups[records[i].meta.family].push_back(i);
    struct Quota {
        Family fam;
        std::size_t n;
        double rem;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [fam, idx] : groups) {
        const double share = static_cast<double>(keep) * static_cast<double>(idx.size()) /
                             static_cast<double>(std::max<std::size_t>(1, major.size()));
        const auto n = static_cast<std::size_t>(std::floor(share));
        quotas.push_back({fam, n, share - static_cast<double>(n)});
        assigned += n;
    }
    std::vector<std::size_t> order(quotas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return quotas[a].rem > quotas[b].rem; });
    for (std::size_t k = 0; assigned < keep && k < order.size(); ++k, ++assigned) ++quotas[order[k]].n;

    for (const auto& q : quotas) {
        auto idx = groups[q.fam];
        Rng rng(derive_seed(seed, family_name(q.fam)));
        rng.shuffle(idx.begin(), idx.end());
        kept.insert(kept.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(q.n, idx.size())));
    }
    std::sort(kept.begin(), kept.end());
    std::vector<DatasetRecord> out;
    out.reserve(kept.size());
    for (std::size_t i : kept) out.push_back(records[i]);
    return out;
}

std::vector<TaskSpec> sample_specs(std::size_t n, std::uint64_t seed, const SpecSampling& sampling) {
    std::vector<TaskSpec> specs(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, "spec", i));
        TaskSpec& s = specs[i];
        s.family = kAllFamilies[rng.below(std::size(kAllFamilies))];
        s.difficulty = rng.uniform(sampling.difficulty_lo, sampling.difficulty_hi);
        s.duration_s = rng.uniform(sampling.duration_lo, sampling.duration_hi);
        s.seed = rng.next_u64();
        s.validate();
    }
    return specs;
}

// ---------------------------------------------------------------------------
// Serialization

json record_to_json(const DatasetRecord& r) {
    return json{{"observation", sequence_to_json(r.observation.states())},
                {"reference", sequence_to_json(r.reference.states())},
                {"target", to_json(r.target)},
                {"meta",
                 {{"family", family_name(r.meta.family)},
                  {"difficulty", r.meta.difficulty},
                  {"seed", r.meta.seed},
                  {"behavior", r.meta.behavior},
                  {"t_index", r.meta.t_index},
                  {"horizon_s", r.meta.horizon_s}}}};
}

DatasetRecord record_from_json(const json& j, std::size_t T_o, std::size_t T_f, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected object");
    for (const char* key : {"observation", "reference", "target", "meta"}) {
        if (!j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    }
    MotionSequence obs = sequence_from_json(j["observation"], where + ": observation");
    MotionSequence ref = sequence_from_json(j["reference"], where + ": reference");
    if (obs.size() != T_o || ref.size() != T_f) {
        throw ParseError(where + ": window lengths " + std::to_string(obs.size()) + "/" + std::to_string(ref.size()) +
                         " differ from " + std::to_string(T_o) + "/" + std::to_string(T_f));
    }
    RecordMeta meta;
    try {
        const auto& m = j["meta"];
        meta.family = family_from_name(m.at("family").get<std::string>());
        meta.difficulty = m.at("difficulty").get<double>();
        meta.seed = m.at("seed").get<std::uint64_t>();
        meta.behavior = m.value("behavior", std::size_t{0});
        meta.t_index = m.at("t_index").get<std::size_t>();
        meta.horizon_s = m.at("horizon_s").get<int>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": meta: " + e.what());
    } catch (const InputError& e) {
        throw ParseError(where + ": meta: " + e.what());
    }
    return DatasetRecord{ObservationWindow(std::move(obs), T_o), ReferenceWindow(std::move(ref), T_f),
                         score_from_json(j["target"], where + ": target"), meta};
}

void write_jsonl(const std::string& path, const std::vector<DatasetRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<DatasetRecord> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::vector<DatasetRecord> out;
    std::string line;
    std::size_t lineno = 0, To = 0, Tf = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": " + e.what());
        }
        if (out.empty()) {
            try {
                To = j.at("observation").at("frames").size();
                Tf = j.at("reference").at("frames").size();
            } catch (const json::exception& e) {
                throw ParseError(where + ": " + e.what());
            }
        }
        out.push_back(record_from_json(j, To, Tf, where));
    }
    return out;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace saw
