// Python bindings. Structured values cross the boundary as plain dicts/lists,
// in the same JSON schema the CLI reads and writes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "saw/adapter.hpp"
#include "saw/config.hpp"
#include "saw/dataset.hpp"
#include "saw/errors.hpp"
#include "saw/model.hpp"
#include "saw/motion_gen.hpp"
#include "saw/random.hpp"
#include "saw/scoring.hpp"
#include "saw/sim.hpp"
#include "saw/train.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json to_cpp(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

saw::RunConfig run_config(const py::object& cfg) {
    return cfg.is_none() ? saw::RunConfig{} : saw::run_config_from_json(to_cpp(cfg));
}

saw::GeneratorOptions generator_for(const saw::RobotModel& robot) {
    saw::GeneratorOptions gen;
    gen.joints = robot.S;
    return gen;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Motion scoring, fall prediction and reference adaptation for a simulated humanoid.";

    auto base = py::register_exception<saw::Error>(m, "SawError", PyExc_RuntimeError);
    py::register_exception<saw::InputError>(m, "InputError", base);
    py::register_exception<saw::ShapeError>(m, "ShapeError", base);
    py::register_exception<saw::BoundsError>(m, "BoundsError", base);
    py::register_exception<saw::ParseError>(m, "ParseError", base);
    py::register_exception<saw::ConfigError>(m, "ConfigError", base);
    py::register_exception<saw::IoError>(m, "IoError", base);
    py::register_exception<saw::NumericError>(m, "NumericError", base);

    m.def("default_config", [] { return to_py(saw::to_json(saw::RunConfig{})); },
          "Run config with every field at its default.");

    m.def("quat_canonicalize", [](std::array<double, 4> q) {
        const saw::Quat c = saw::quat_canonicalize({q[0], q[1], q[2], q[3]});
        return std::array<double, 4>{c.w, c.x, c.y, c.z};
    }, py::arg("wxyz"));

    m.def("sample_specs", [](std::size_t n, std::uint64_t seed) {
        json out = json::array();
        for (const auto& s : saw::sample_specs(n, seed)) out.push_back(saw::to_json(s));
        return to_py(out);
    }, py::arg("n"), py::arg("seed"));

    m.def("generate_reference", [](const py::object& task, int joints) {
        saw::GeneratorOptions gen;
        gen.joints = joints;
        return to_py(saw::sequence_to_json(saw::generate_reference(saw::task_from_json(to_cpp(task)), gen)));
    }, py::arg("task"), py::arg("joints") = saw::kDefaultJoints,
       "Reference motion of a task spec as {dt, frames: [...]}.");

    m.def("rollout", [](const py::object& reference, const py::object& cfg, std::optional<std::uint64_t> jitter_seed) {
        const saw::RobotModel robot = run_config(cfg).robot_model;
        const saw::MotionSequence ref = saw::sequence_from_json(to_cpp(reference), "reference");
        const auto r = saw::rollout(robot, saw::init_state(robot, ref.front(), jitter_seed), ref);
        json out{{"executed", saw::sequence_to_json(r.executed)}, {"fall", r.fall}, {"fall_frame", nullptr}};
        if (r.fall_frame) out["fall_frame"] = *r.fall_frame;
        return to_py(out);
    }, py::arg("reference"), py::arg("config") = py::none(), py::arg("jitter_seed") = py::none(),
       "Tracks a reference from rest at its first frame.");

    m.def("compute_scores", [](const py::object& reference, const py::object& executed, bool fall) {
        return to_py(saw::to_json(saw::compute_scores(saw::sequence_from_json(to_cpp(reference), "reference"),
                                                      saw::sequence_from_json(to_cpp(executed), "executed"), fall)));
    }, py::arg("reference"), py::arg("executed"), py::arg("fall"));

    m.def("scalarize", [](const py::object& scores, const py::object& weights, const py::object& norm) {
        const saw::RankWeights w = weights.is_none() ? saw::RankWeights{} : saw::rank_weights_from_json(to_cpp(weights));
        const saw::NormStats n = norm.is_none() ? saw::NormStats{} : saw::norm_stats_from_json(to_cpp(norm));
        return saw::scalarize(saw::score_from_json(to_cpp(scores)), w, n);
    }, py::arg("scores"), py::arg("weights") = py::none(), py::arg("norm") = py::none());

    m.def("rank_candidates", [](const py::list& scores, const py::object& weights, const py::object& norm) {
        const saw::RankWeights w = weights.is_none() ? saw::RankWeights{} : saw::rank_weights_from_json(to_cpp(weights));
        const saw::NormStats n = norm.is_none() ? saw::NormStats{} : saw::norm_stats_from_json(to_cpp(norm));
        std::vector<saw::ScoreVector> s;
        for (const auto& item : scores) s.push_back(saw::score_from_json(to_cpp(item)));
        return saw::rank_candidates(s, w, n);
    }, py::arg("scores"), py::arg("weights") = py::none(), py::arg("norm") = py::none(),
       "Candidate indices, best first.");

    m.def("gen_data", [](const py::object& cfg, const std::string& out_dir, int horizon_s) {
        const saw::RunConfig c = run_config(cfg);
        saw::DatasetSplits splits;
        {
            py::gil_scoped_release release;
            splits = saw::build_splits(c, horizon_s);
        }
        json counts;
        const std::pair<const char*, const std::vector<saw::DatasetRecord>*> parts[] = {
            {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
        for (const auto& [name, records] : parts) {
            saw::write_jsonl(out_dir + "/" + name + ".jsonl", *records);
            counts[name] = records->size();
        }
        return to_py(counts);
    }, py::arg("config"), py::arg("out_dir"), py::arg("horizon_s") = 1,
       "Writes train/val/test JSONL splits into an existing directory; returns record counts.");

    m.def("train", [](const py::object& cfg, const std::string& data_dir, const std::string& ckpt) {
        const saw::RunConfig c = run_config(cfg);
        const auto train_set = saw::read_jsonl(data_dir + "/train.jsonl");
        const auto val_set = saw::read_jsonl(data_dir + "/val.jsonl");
        saw::TrainOptions opt = c.train;
        opt.seed = saw::derive_seed(c.seed, "train");
        saw::TrainResult result;
        {
            py::gil_scoped_release release;
            result = saw::train(c.saw, train_set, val_set, opt);
        }
        saw::save_checkpoint(result.params, ckpt);
        return to_py(saw::to_json(result));
    }, py::arg("config"), py::arg("data_dir"), py::arg("ckpt"),
       "Trains on data_dir/{train,val}.jsonl with the same seeding as the CLI; returns the training log.");

    m.def("evaluate", [](const std::string& ckpt, const std::string& data) {
        const saw::SawParams params = saw::load_checkpoint(ckpt);
        const auto records = saw::read_jsonl(data);
        return to_py(saw::metrics_row(saw::evaluate(params, records), params.config.variant,
                                      params.config.horizon_seconds));
    }, py::arg("ckpt"), py::arg("data"));

    py::class_<saw::SawParams>(m, "Model", "A trained checkpoint.")
        .def(py::init([](const std::string& path) { return saw::load_checkpoint(path); }), py::arg("path"))
        .def_property_readonly("config", [](const saw::SawParams& p) { return to_py(saw::to_json(p.config)); })
        .def_property_readonly("target_norm", [](const saw::SawParams& p) { return to_py(saw::to_json(p.target_norm)); })
        .def("predict", [](const saw::SawParams& p, const py::object& observed, const py::object& reference) {
            const saw::ObservationWindow obs(saw::sequence_from_json(to_cpp(observed), "observed"),
                                             static_cast<std::size_t>(p.config.T_o));
            const saw::ReferenceWindow ref(saw::sequence_from_json(to_cpp(reference), "reference"),
                                           static_cast<std::size_t>(p.config.T_f));
            return to_py(saw::to_json(saw::forward(p, obs, ref).scores));
        }, py::arg("observed"), py::arg("reference"),
           "Predicted scores of following `reference` after `observed`; fall is a probability.");

    m.def("adapt", [](const py::object& task, const saw::SawParams* model, bool oracle, const py::object& cfg) {
        saw::RunConfig c = run_config(cfg);
        if (!model && !oracle) throw saw::ConfigError("adapt: pass a model or oracle=True");
        c.adapter.seed = saw::derive_seed(c.seed, "adapt");
        if (model) c.adapter.horizon_s = model->config.horizon_seconds;
        const saw::TaskSpec spec = saw::task_from_json(to_cpp(task));
        const saw::GeneratorOptions gen = generator_for(c.robot_model);
        const auto run = [&] {
            py::gil_scoped_release release;
            if (oracle) {
                return saw::adapt_rollout(spec, saw::oracle_scorer(c.robot_model),
                                          model ? model->target_norm : saw::NormStats{}, c.robot_model, c.adapter, gen);
            }
            return saw::adapt_rollout(spec, *model, c.robot_model, c.adapter, gen);
        };
        const saw::AdaptTrace trace = run();
        return to_py(saw::to_json(trace));
    }, py::arg("task"), py::arg("model") = nullptr, py::arg("oracle") = false, py::arg("config") = py::none(),
       "Adaptive rollout of one task; with oracle=True candidates are scored by simulation.");

    m.def("baseline", [](const py::object& task, const py::object& cfg) {
        const saw::RunConfig c = run_config(cfg);
        return to_py(saw::to_json(saw::baseline_rollout(saw::task_from_json(to_cpp(task)), c.robot_model,
                                                        generator_for(c.robot_model))));
    }, py::arg("task"), py::arg("config") = py::none());
}
