#include "saw/train.hpp"

#include <cmath>
#include <numeric>

#include "saw/errors.hpp"
#include "saw/nn/ops.hpp"
#include "saw/random.hpp"

namespace saw {

using nlohmann::json;

json to_json(const TrainOptions& o) {
    return json{{"lr", o.adam.lr},
                {"beta1", o.adam.beta1},
                {"beta2", o.adam.beta2},
                {"eps", o.adam.eps},
                {"batch_size", o.batch_size},
                {"max_epochs", o.max_epochs},
                {"patience", o.patience},
                {"max_steps", o.max_steps}};
}

TrainOptions train_options_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected object");
    TrainOptions o;
    auto number = [&](const char* key, double& dst, double lo) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) throw ConfigError(where + "." + key + ": expected number");
        dst = j[key].get<double>();
        if (!(dst > lo)) throw ConfigError(where + "." + key + ": out of range");
    };
    auto count = [&](const char* key, auto& dst, long long lo) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer() || j[key].get<long long>() < lo) {
            throw ConfigError(where + "." + key + ": expected integer >= " + std::to_string(lo));
        }
        dst = static_cast<std::remove_reference_t<decltype(dst)>>(j[key].get<long long>());
    };
    number("lr", o.adam.lr, 0.0);
    number("beta1", o.adam.beta1, -1e-300);
    number("beta2", o.adam.beta2, -1e-300);
    number("eps", o.adam.eps, 0.0);
    count("batch_size", o.batch_size, 1);
    count("max_epochs", o.max_epochs, 1);
    count("patience", o.patience, 1);
    count("max_steps", o.max_steps, 0);
    return o;
}

json to_json(const TrainResult& r) {
    json epochs = json::array();
    for (const auto& e : r.log) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"val_loss", e.val_loss},
                          {"val_fall_accuracy", e.val_fall_accuracy}});
    }
    return json{{"epochs", std::move(epochs)},
                {"best_epoch", r.best_epoch},
                {"best_val_fall_accuracy", r.best_val_fall_accuracy},
                {"steps", r.step_losses.size()}};
}

void check_records(const SawConfig& config, const std::vector<DatasetRecord>& records, const char* what) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.observation.size() != static_cast<std::size_t>(config.T_o) ||
            r.reference.size() != static_cast<std::size_t>(config.T_f)) {
            throw ConfigError(std::string(what) + " record " + std::to_string(i) + ": windows " +
                              std::to_string(r.observation.size()) + "/" + std::to_string(r.reference.size()) +
                              " frames, model expects " + std::to_string(config.T_o) + "/" +
                              std::to_string(config.T_f));
        }
        if (r.meta.horizon_s != config.horizon_seconds) {
            throw ConfigError(std::string(what) + " record " + std::to_string(i) + ": horizon " +
                              std::to_string(r.meta.horizon_s) + " s, model horizon " +
                              std::to_string(config.horizon_seconds) + " s");
        }
        if (r.observation.states().joints() != static_cast<std::size_t>(config.S)) {
            throw ConfigError(std::string(what) + " record " + std::to_string(i) + ": joint count differs from saw.S");
        }
    }
}

namespace {

// Flattened features of every record, computed once.
struct FeatureCache {
    std::vector<std::vector<double>> obs;
    std::vector<std::vector<double>> ref;

    explicit FeatureCache(const std::vector<DatasetRecord>& records) {
        obs.reserve(records.size());
        ref.reserve(records.size());
        for (const auto& r : records) {
            obs.push_back(flatten_frames(r.observation.states()));
            ref.push_back(flatten_frames(r.reference.states()));
        }
    }

    FeatureBatch batch(const std::size_t* idx, std::size_t n) const {
        FeatureBatch b;
        b.batch = n;
        for (std::size_t k = 0; k < n; ++k) {
            b.obs.insert(b.obs.end(), obs[idx[k]].begin(), obs[idx[k]].end());
            b.ref.insert(b.ref.end(), ref[idx[k]].begin(), ref[idx[k]].end());
        }
        return b;
    }
};

std::vector<double> concat_rows(const std::vector<std::vector<double>>& parts) {
    std::vector<double> all;
    for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    return all;
}

EvalMetrics evaluate_cached(const SawParams& params, const std::vector<DatasetRecord>& records,
                            const FeatureCache& cache, std::size_t batch_size) {
    EvalMetrics m;
    m.count = records.size();
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < records.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, records.size() - start);
        const FeatureBatch fb = cache.batch(idx.data() + start, n);
        nn::Tape tape;
        const TapeParams vars = attach(tape, params, false);
        const nn::Var out = forward_outputs(tape, params, vars, fb);
        std::vector<ScoreVector> targets(n);
        for (std::size_t k = 0; k < n; ++k) targets[k] = records[start + k].target;
        loss_sum += loss(out, targets, params.target_norm).value()[0] * static_cast<double>(n);
        const nn::Tensor& o = out.value();
        for (std::size_t k = 0; k < n; ++k) {
            const auto& tgt = records[start + k].target;
            const bool pred_fall = o.at(k, 0) > 0.0;
            if (pred_fall == (tgt.fall > 0.5)) ++correct;
            const auto raw = tgt.regression();
            for (std::size_t c = 0; c < ScoreVector::kRegression; ++c) {
                const double p =
                    std::max(0.0, o.at(k, 1 + c) * params.target_norm.std[c] + params.target_norm.mean[c]);
                m.mse[c] += (p - raw[c]) * (p - raw[c]);
            }
        }
    }
    const auto N = static_cast<double>(records.size());
    m.fall_accuracy = static_cast<double>(correct) / N;
    for (auto& v : m.mse) v /= N;
    m.loss = loss_sum / N;
    if (!std::isfinite(m.loss)) throw NumericError("evaluate: non-finite loss");
    return m;
}

}  // namespace

TrainResult train(const SawConfig& config, const std::vector<DatasetRecord>& train_set,
                  const std::vector<DatasetRecord>& val_set, const TrainOptions& options) {
    config.validate();
    if (train_set.empty()) throw InputError("train: empty training set");
    if (options.batch_size == 0) throw ConfigError("train.batch_size: must be >= 1");
    check_records(config, train_set, "train");
    check_records(config, val_set, "val");

    TrainResult result;
    SawParams params = init_params(config, derive_seed(options.seed, "init"));
    const FeatureCache cache(train_set);
    const FeatureCache val_cache(val_set);
    params.obs_input = InputStats::fit(concat_rows(cache.obs), config.features());
    params.ref_input = InputStats::fit(concat_rows(cache.ref), config.features());
    std::vector<ScoreVector> targets;
    targets.reserve(train_set.size());
    for (const auto& r : train_set) targets.push_back(r.target);
    params.target_norm = NormStats::fit(targets);

    nn::Adam adam(options.adam);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    result.params = params;
    int since_best = 0;
    bool done = false;

    for (int epoch = 0; epoch < options.max_epochs && !done; ++epoch) {
        Rng rng(derive_seed(options.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t n = std::min(options.batch_size, order.size() - start);
            const FeatureBatch fb = cache.batch(order.data() + start, n);
            std::vector<ScoreVector> batch_targets(n);
            for (std::size_t k = 0; k < n; ++k) batch_targets[k] = targets[order[start + k]];

            nn::Tape tape;
            const TapeParams vars = attach(tape, params, true);
            const nn::Var l = loss(forward_outputs(tape, params, vars, fb), batch_targets, params.target_norm);
            const double lv = l.value()[0];
            if (!std::isfinite(lv)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(result.step_losses.size()));
            }
            tape.backward(l);
            nn::ParamMap grads;
            for (const auto& [name, v] : vars.vars) {
                const nn::Tensor& g = v.grad();
                grads.emplace(name, g.shape() == v.shape() ? g : nn::Tensor::zeros_like(v.value()));
            }
            adam.step(params.weights, grads);
            result.step_losses.push_back(lv);
            epoch_loss += lv;
            ++batches;
            if (options.max_steps && result.step_losses.size() >= options.max_steps) {
                done = true;
                break;
            }
        }

        EpochLog log{epoch, epoch_loss / static_cast<double>(batches), 0.0, 0.0};
        if (!val_set.empty()) {
            const EvalMetrics vm = evaluate_cached(params, val_set, val_cache, 256);
            log.val_loss = vm.loss;
            log.val_fall_accuracy = vm.fall_accuracy;
        }
        result.log.push_back(log);
        if (val_set.empty() || result.best_epoch < 0 || log.val_fall_accuracy > result.best_val_fall_accuracy) {
            result.best_epoch = epoch;
            result.best_val_fall_accuracy = log.val_fall_accuracy;
            result.params = params;
            since_best = 0;
        } else if (++since_best >= options.patience) {
            break;
        }
    }
    return result;
}

EvalMetrics evaluate(const SawParams& params, const std::vector<DatasetRecord>& records, std::size_t batch_size) {
    if (records.empty()) throw InputError("evaluate: empty dataset");
    check_records(params.config, records, "eval");
    return evaluate_cached(params, records, FeatureCache(records), std::max<std::size_t>(1, batch_size));
}

json metrics_row(const EvalMetrics& m, Variant variant, int horizon_s) {
    json mse = json::object();
    for (std::size_t c = 0; c < ScoreVector::kRegression; ++c) mse[kRegressionNames[c]] = m.mse[c];
    return json{{"variant", variant_name(variant)},
                {"horizon_s", horizon_s},
                {"fall_accuracy", 100.0 * m.fall_accuracy},
                {"mse", std::move(mse)},
                {"count", m.count}};
}

}  // namespace saw
