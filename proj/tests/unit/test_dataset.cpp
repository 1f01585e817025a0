#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "saw/dataset.hpp"
#include "saw/errors.hpp"
#include "saw/random.hpp"
#include "saw/scoring.hpp"

using namespace saw;

namespace {

DatasetOptions small_options(unsigned threads = 1) {
    DatasetOptions o;
    o.threads = threads;
    return o;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool records_equal(const DatasetRecord& a, const DatasetRecord& b) {
    return a.observation.states() == b.observation.states() && a.reference.states() == b.reference.states() &&
           a.target == b.target && a.meta.family == b.meta.family && a.meta.difficulty == b.meta.difficulty &&
           a.meta.seed == b.meta.seed && a.meta.behavior == b.meta.behavior && a.meta.t_index == b.meta.t_index &&
           a.meta.horizon_s == b.meta.horizon_s;
}

}  // namespace

TEST_CASE("records are windows of the spec's own rollout") {
    const auto specs = sample_specs(40, 11);
    const DatasetOptions opt = small_options();
    const BuiltDataset ds = build_dataset(specs, opt);
    CHECK(ds.records.size() <= specs.size() * 9);
    CHECK(ds.records.size() >= specs.size() * 3);
    CHECK(ds.stats.count == ds.records.size());

    std::size_t checked = 0;
    for (const TaskSpec& spec : specs) {
        const MotionSequence ref = generate_reference(spec);
        for (const DatasetRecord& r : ds.records) {
            if (r.meta.seed != spec.seed) continue;
            const SimState init = init_state(opt.robot, ref.front(), derive_seed(spec.seed, "behavior", r.meta.behavior));
            const RolloutResult run = rollout(opt.robot, init, ref);
            const std::size_t t = r.meta.t_index;
            REQUIRE(t >= 25);
            REQUIRE(t + 50 <= ref.size());
            // Observation is [t - 25, t), reference [t, t + 50): adjacent, never overlapping.
            CHECK(r.observation.states() == slice_window(run.executed, t - 25, 25));
            CHECK(r.reference.states() == slice_window(ref, t, 50));
            if (run.fall_frame) CHECK(t <= *run.fall_frame);
            const bool fell = run.fall_frame && *run.fall_frame < t + 50;
            CHECK(r.target == compute_scores(r.reference.states(), slice_window(run.executed, t, 50), fell));
            ++checked;
        }
    }
    CHECK(checked == ds.records.size());
}

TEST_CASE("dataset is independent of the thread count") {
    const auto specs = sample_specs(24, 5);
    const BuiltDataset a = build_dataset(specs, small_options(1));
    const BuiltDataset b = build_dataset(specs, small_options(4));
    REQUIRE(a.records.size() == b.records.size());
    write_jsonl("test_ds_a.jsonl", a.records);
    write_jsonl("test_ds_b.jsonl", b.records);
    CHECK(slurp("test_ds_a.jsonl") == slurp("test_ds_b.jsonl"));
    std::remove("test_ds_a.jsonl");
    std::remove("test_ds_b.jsonl");
    CHECK(sample_specs(24, 5)[17].seed == specs[17].seed);
    CHECK(sample_specs(30, 5)[17].seed == specs[17].seed);  // spec i depends only on (seed, i)
}

TEST_CASE("short references are skipped") {
    TaskSpec s;
    s.duration_s = 3.0;
    DatasetOptions o;
    o.horizon_s = 3;
    const BuiltDataset ds = build_dataset({s}, o);
    CHECK(ds.records.empty());
    CHECK(ds.stats.skipped_specs == 1);
    CHECK_THROWS_AS(build_dataset({}, o), InputError);
}

TEST_CASE("rebalance gives exactly half falls and keeps order") {
    const auto specs = sample_specs(60, 21);
    const BuiltDataset ds = build_dataset(specs, small_options());
    REQUIRE(ds.stats.fall_fraction > 0.0);
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto bal = rebalance(ds.records, seed);
        const DatasetStats st = dataset_stats(bal);
        CHECK(std::abs(st.fall_fraction - 0.5) <= 0.02);
        CHECK(st.fall_fraction == 0.5);
        // Input order preserved: every kept record appears in order in the source.
        std::size_t j = 0;
        for (const auto& r : bal) {
            while (j < ds.records.size() && !records_equal(ds.records[j], r)) ++j;
            CHECK(j < ds.records.size());
        }
    }
    CHECK(rebalance(ds.records, 4).size() == rebalance(ds.records, 5).size());
}

TEST_CASE("jsonl round trip and errors") {
    const auto specs = sample_specs(6, 3);
    const BuiltDataset ds = build_dataset(specs, small_options());
    write_jsonl("test_rt.jsonl", ds.records);
    const auto back = read_jsonl("test_rt.jsonl");
    REQUIRE(back.size() == ds.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(records_equal(back[i], ds.records[i]));

    // Corrupt line 3.
    std::string text = slurp("test_rt.jsonl");
    std::size_t pos = 0;
    for (int k = 0; k < 2; ++k) pos = text.find('\n', pos) + 1;
    text.insert(pos, "{\"observation\": 3}\n");
    {
        std::ofstream out("test_bad.jsonl");
        out << text;
    }
    try {
        read_jsonl("test_bad.jsonl");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("test_bad.jsonl:3") != std::string::npos);
    }
    {
        std::ofstream out("test_bad.jsonl");
        out << slurp("test_rt.jsonl").substr(0, 50) << "\n";
    }
    CHECK_THROWS_AS(read_jsonl("test_bad.jsonl"), ParseError);
    std::remove("test_rt.jsonl");
    std::remove("test_bad.jsonl");
    CHECK_THROWS_AS(read_jsonl("/nonexistent/x.jsonl"), IoError);
    CHECK_THROWS_AS(write_jsonl("/nonexistent/dir/x.jsonl", ds.records), IoError);
}
