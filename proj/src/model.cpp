#include "saw/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "saw/errors.hpp"
#include "saw/nn/ops.hpp"
#include "saw/random.hpp"

namespace saw {

using nlohmann::json;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::string_view kVariantNames[] = {"full", "no_ref", "no_obs", "no_cross_attn", "inverted"};

bool uses_obs_stream(Variant v) { return v == Variant::kFull || v == Variant::kNoRef || v == Variant::kNoCrossAttn; }
bool uses_ref_stream(Variant v) {
    return v == Variant::kNoObs || v == Variant::kNoCrossAttn || v == Variant::kInverted;
}
bool uses_cross(Variant v) { return v == Variant::kFull || v == Variant::kInverted; }
bool uses_obs_encoder(Variant v) { return v != Variant::kNoObs; }
bool uses_ref_encoder(Variant v) { return v != Variant::kNoRef; }

std::string layer_prefix(const char* stack, int i) { return std::string(stack) + "." + std::to_string(i) + "."; }

}  // namespace

std::string_view variant_name(Variant v) { return kVariantNames[static_cast<int>(v)]; }

Variant variant_from_name(std::string_view name) {
    for (Variant v : kAllVariants) {
        if (variant_name(v) == name) return v;
    }
    throw ConfigError("unknown variant '" + std::string(name) + "'");
}

SawConfig SawConfig::for_horizon(int horizon_s, double dt) {
    SawConfig c;
    c.horizon_seconds = horizon_s;
    c.T_o = static_cast<int>(std::lround(0.5 / dt));
    c.T_f = static_cast<int>(std::lround(horizon_s / dt));
    return c;
}

void SawConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) { throw ConfigError("saw." + field + ": " + why); };
    if (S < 1) fail("S", "must be >= 1");
    if (T_o < 1) fail("T_o", "must be >= 1");
    if (T_f < 1) fail("T_f", "must be >= 1");
    if (d_model < 1) fail("d_model", "must be >= 1");
    if (n_heads < 1 || d_model % n_heads != 0) fail("n_heads", "must divide d_model");
    if (n_self_layers < 0) fail("n_self_layers", "must be >= 0");
    if (n_cross_layers < 0) fail("n_cross_layers", "must be >= 0");
    if (mlp_hidden < 1) fail("mlp_hidden", "must be >= 1");
    if (horizon_seconds < 1 || horizon_seconds > 3) fail("horizon_seconds", "must be 1, 2 or 3");
}

void SawConfig::validate_windows(double dt) const {
    validate();
    if (T_o != static_cast<int>(std::lround(0.5 / dt))) throw ConfigError("saw.T_o: must span 0.5 s");
    if (T_f != static_cast<int>(std::lround(horizon_seconds / dt))) {
        throw ConfigError("saw.T_f: must span horizon_seconds (" + std::to_string(horizon_seconds) + " s)");
    }
}

json to_json(const SawConfig& c) {
    return json{{"S", c.S},
                {"T_o", c.T_o},
                {"T_f", c.T_f},
                {"d_model", c.d_model},
                {"n_heads", c.n_heads},
                {"n_self_layers", c.n_self_layers},
                {"n_cross_layers", c.n_cross_layers},
                {"mlp_hidden", c.mlp_hidden},
                {"variant", variant_name(c.variant)},
                {"horizon_seconds", c.horizon_seconds},
                {"add_pe_to_reference", c.add_pe_to_reference}};
}

SawConfig saw_config_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected object");
    SawConfig c;
    if (j.contains("horizon_seconds")) {
        if (!j["horizon_seconds"].is_number_integer()) throw ConfigError(where + ".horizon_seconds: expected integer");
        c = SawConfig::for_horizon(j["horizon_seconds"].get<int>());
    }
    auto integer = [&](const char* key, int& dst) {
        if (!j.contains(key)) return;
        if (!j[key].is_number_integer()) throw ConfigError(where + "." + key + ": expected integer");
        dst = j[key].get<int>();
    };
    integer("S", c.S);
    integer("T_o", c.T_o);
    integer("T_f", c.T_f);
    integer("d_model", c.d_model);
    integer("n_heads", c.n_heads);
    integer("n_self_layers", c.n_self_layers);
    integer("n_cross_layers", c.n_cross_layers);
    integer("mlp_hidden", c.mlp_hidden);
    if (j.contains("variant")) {
        if (!j["variant"].is_string()) throw ConfigError(where + ".variant: expected string");
        try {
            c.variant = variant_from_name(j["variant"].get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(where + ".variant: " + e.what());
        }
    }
    if (j.contains("add_pe_to_reference")) {
        if (!j["add_pe_to_reference"].is_boolean()) throw ConfigError(where + ".add_pe_to_reference: expected bool");
        c.add_pe_to_reference = j["add_pe_to_reference"].get<bool>();
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Parameters

InputStats InputStats::identity(std::size_t features) {
    return {std::vector<double>(features, 0.0), std::vector<double>(features, 1.0)};
}

InputStats InputStats::fit(const std::vector<double>& rows, std::size_t features) {
    InputStats s = identity(features);
    const std::size_t n = rows.size() / features;
    if (n == 0) return s;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < features; ++f) s.mean[f] += rows[r * features + f];
    }
    for (auto& m : s.mean) m /= static_cast<double>(n);
    std::vector<double> var(features, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < features; ++f) {
            const double d = rows[r * features + f] - s.mean[f];
            var[f] += d * d;
        }
    }
    for (std::size_t f = 0; f < features; ++f) {
        const double sd = std::sqrt(var[f] / static_cast<double>(n));
        s.std[f] = sd > 1e-6 ? sd : 1.0;
    }
    return s;
}

namespace {

struct ParamSpec {
    std::string name;
    std::size_t rows, cols;
    enum Kind { kMatrix, kZero, kOne, kToken } kind;
};

void mlp_specs(std::vector<ParamSpec>& out, const std::string& p, std::size_t in, std::size_t hidden,
               std::size_t outd) {
    out.push_back({p + "l1.w", in, hidden, ParamSpec::kMatrix});
    out.push_back({p + "l1.b", 1, hidden, ParamSpec::kZero});
    out.push_back({p + "l2.w", hidden, outd, ParamSpec::kMatrix});
    out.push_back({p + "l2.b", 1, outd, ParamSpec::kZero});
}

void ln_specs(std::vector<ParamSpec>& out, const std::string& p, std::size_t d) {
    out.push_back({p + "g", 1, d, ParamSpec::kOne});
    out.push_back({p + "b", 1, d, ParamSpec::kZero});
}

void attn_specs(std::vector<ParamSpec>& out, const std::string& p, std::size_t d) {
    for (const char* m : {"q", "k", "v", "o"}) {
        out.push_back({p + "w" + m, d, d, ParamSpec::kMatrix});
        // A key bias only shifts every logit of a query by the same amount, so
        // softmax cancels it; it would be a parameter with zero gradient.
        if (std::string_view(m) != "k") out.push_back({p + "b" + m, 1, d, ParamSpec::kZero});
    }
}

void block_specs(std::vector<ParamSpec>& out, const std::string& p, std::size_t d, std::size_t hidden, bool cross) {
    ln_specs(out, p + "ln1.", d);
    if (cross) ln_specs(out, p + "ln_kv.", d);
    attn_specs(out, p + "attn.", d);
    ln_specs(out, p + "ln2.", d);
    mlp_specs(out, p + "ff.", d, hidden, d);
}

std::vector<ParamSpec> param_specs(const SawConfig& c) {
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto hid = static_cast<std::size_t>(c.mlp_hidden);
    const std::size_t in = c.features();
    std::vector<ParamSpec> s;
    if (uses_obs_encoder(c.variant)) mlp_specs(s, "enc_obs.", in, hid, d);
    if (uses_ref_encoder(c.variant)) mlp_specs(s, "enc_ref.", in, hid, d);
    if (uses_obs_stream(c.variant)) {
        s.push_back({"cls_obs", 1, d, ParamSpec::kToken});
        for (int i = 0; i < c.n_self_layers; ++i) block_specs(s, layer_prefix("self_obs", i), d, hid, false);
        ln_specs(s, "final_ln_obs.", d);
    }
    if (uses_ref_stream(c.variant)) {
        s.push_back({"cls_ref", 1, d, ParamSpec::kToken});
        for (int i = 0; i < c.n_self_layers; ++i) block_specs(s, layer_prefix("self_ref", i), d, hid, false);
        ln_specs(s, "final_ln_ref.", d);
    }
    if (uses_cross(c.variant)) {
        for (int i = 0; i < c.n_cross_layers; ++i) block_specs(s, layer_prefix("cross", i), d, hid, true);
    }
    const std::size_t head_in = c.variant == Variant::kNoCrossAttn ? 2 * d : d;
    s.push_back({"head.l1.w", head_in, d, ParamSpec::kMatrix});
    s.push_back({"head.l1.b", 1, d, ParamSpec::kZero});
    s.push_back({"head.l2.w", d, 1 + ScoreVector::kRegression, ParamSpec::kMatrix});
    s.push_back({"head.l2.b", 1, 1 + ScoreVector::kRegression, ParamSpec::kZero});
    return s;
}

}  // namespace

std::vector<std::string> parameter_names(const SawConfig& config) {
    std::vector<std::string> names;
    for (const auto& s : param_specs(config)) names.push_back(s.name);
    return names;
}

SawParams init_params(const SawConfig& config, std::uint64_t seed) {
    config.validate();
    SawParams p;
    p.config = config;
    p.obs_input = InputStats::identity(config.features());
    p.ref_input = InputStats::identity(config.features());
    for (const auto& spec : param_specs(config)) {
        Tensor t({spec.rows, spec.cols});
        Rng rng(derive_seed(seed, spec.name));
        switch (spec.kind) {
            case ParamSpec::kMatrix: {
                const double a = std::sqrt(6.0 / static_cast<double>(spec.rows + spec.cols));
                for (auto& v : t.values()) v = rng.uniform(-a, a);
                break;
            }
            case ParamSpec::kOne: std::fill(t.values().begin(), t.values().end(), 1.0); break;
            case ParamSpec::kToken:
                for (auto& v : t.values()) v = 0.1 * rng.normal();
                break;
            case ParamSpec::kZero: break;
        }
        p.weights.emplace(spec.name, std::move(t));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json stats_json(const InputStats& s) { return json{{"mean", s.mean}, {"std", s.std}}; }

InputStats stats_from(const json& j, std::size_t features, const char* what) {
    InputStats s;
    try {
        s.mean = j.at("mean").get<std::vector<double>>();
        s.std = j.at("std").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint norm_stats.") + what + ": " + e.what());
    }
    if (s.mean.size() != features || s.std.size() != features) {
        throw ParseError(std::string("checkpoint norm_stats.") + what + ": expected " + std::to_string(features) +
                         " features");
    }
    return s;
}

}  // namespace

json checkpoint_to_json(const SawParams& p) {
    json params = json::object();
    for (const auto& [name, t] : p.weights) params[name] = json{{"shape", t.shape()}, {"values", t.values()}};
    return json{{"config", to_json(p.config)},
                {"norm_stats",
                 {{"obs_input", stats_json(p.obs_input)},
                  {"ref_input", stats_json(p.ref_input)},
                  {"target", to_json(p.target_norm)}}},
                {"params", std::move(params)}};
}

SawParams checkpoint_from_json(const json& j) {
    if (!j.is_object() || !j.contains("config") || !j.contains("params") || !j.contains("norm_stats")) {
        throw ParseError("checkpoint: expected {config, norm_stats, params}");
    }
    SawParams p;
    p.config = saw_config_from_json(j["config"], "checkpoint.config");
    const auto& ns = j["norm_stats"];
    p.obs_input = stats_from(ns.value("obs_input", json::object()), p.config.features(), "obs_input");
    p.ref_input = stats_from(ns.value("ref_input", json::object()), p.config.features(), "ref_input");
    if (!ns.contains("target")) throw ParseError("checkpoint norm_stats.target: missing");
    p.target_norm = norm_stats_from_json(ns["target"]);
    for (const auto& spec : param_specs(p.config)) {
        const auto it = j["params"].find(spec.name);
        if (it == j["params"].end()) throw ParseError("checkpoint params." + spec.name + ": missing");
        try {
            Tensor t(it->at("shape").get<nn::Shape>(), it->at("values").get<std::vector<double>>());
            if (t.shape() != nn::Shape{spec.rows, spec.cols}) {
                throw ParseError("checkpoint params." + spec.name + ": shape " + nn::shape_str(t.shape()) +
                                 " does not match config");
            }
            p.weights.emplace(spec.name, std::move(t));
        } catch (const json::exception& e) {
            throw ParseError("checkpoint params." + spec.name + ": " + e.what());
        } catch (const ShapeError& e) {
            throw ParseError("checkpoint params." + spec.name + ": " + e.what());
        }
    }
    return p;
}

void save_checkpoint(const SawParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    out << checkpoint_to_json(p).dump() << '\n';
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

SawParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("checkpoint '" + path + "': " + e.what());
    }
    return checkpoint_from_json(j);
}

// ---------------------------------------------------------------------------
// Forward pass

std::vector<double> flatten_frames(const MotionSequence& seq) {
    std::vector<double> rows;
    rows.reserve(seq.size() * frame_features(seq.joints()));
    for (const auto& f : seq.frames()) flatten_state(f, rows);
    return rows;
}

FeatureBatch make_batch(const SawConfig& config, const std::vector<const ObservationWindow*>& obs,
                        const std::vector<const ReferenceWindow*>& ref) {
    if (obs.size() != ref.size()) throw ShapeError("make_batch: observation/reference counts differ");
    FeatureBatch b;
    b.batch = obs.size();
    const auto S = static_cast<std::size_t>(config.S);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& o = obs[i]->states();
        const auto& r = ref[i]->states();
        if (o.size() != static_cast<std::size_t>(config.T_o) || r.size() != static_cast<std::size_t>(config.T_f)) {
            throw ShapeError("make_batch: item " + std::to_string(i) + " has windows " + std::to_string(o.size()) +
                             "/" + std::to_string(r.size()) + ", model expects " + std::to_string(config.T_o) + "/" +
                             std::to_string(config.T_f));
        }
        if (o.joints() != S || r.joints() != S) {
            throw ShapeError("make_batch: item " + std::to_string(i) + " joint dimension differs from model S=" +
                             std::to_string(S));
        }
        for (const auto& f : o.frames()) flatten_state(f, b.obs);
        for (const auto& f : r.frames()) flatten_state(f, b.ref);
    }
    return b;
}

Var TapeParams::operator[](const std::string& name) const {
    const auto it = vars.find(name);
    if (it == vars.end()) throw InputError("model parameter '" + name + "' not present for this variant");
    return it->second;
}

TapeParams attach(Tape& tape, const SawParams& params, bool trainable) {
    TapeParams tp;
    for (const auto& [name, t] : params.weights) {
        tp.vars.emplace(name, trainable ? tape.leaf(t) : tape.constant(t));
    }
    return tp;
}

Tensor positional_embedding(std::size_t rows, std::size_t d) {
    Tensor pe({rows, d});
    for (std::size_t pos = 0; pos < rows; ++pos) {
        for (std::size_t i = 0; i < d; ++i) {
            const double expo = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
            const double angle = static_cast<double>(pos) / std::pow(10000.0, expo);
            pe.at(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

namespace {

Var mlp(const TapeParams& v, const std::string& p, Var x) {
    return linear(gelu(linear(x, v[p + "l1.w"], v[p + "l1.b"])), v[p + "l2.w"], v[p + "l2.b"]);
}

Var ln(const TapeParams& v, const std::string& p, Var x) { return layer_norm(x, v[p + "g"], v[p + "b"]); }

Var attend(const TapeParams& v, const std::string& p, Var xq, Var xkv, std::size_t heads, std::size_t batch) {
    const Var q = linear(xq, v[p + "wq"], v[p + "bq"]);
    const Var k = matmul(xkv, v[p + "wk"]);
    const Var val = linear(xkv, v[p + "wv"], v[p + "bv"]);
    return linear(nn::attention(q, k, val, heads, batch), v[p + "wo"], v[p + "bo"]);
}

// Pre-norm self-attention block with residuals.
Var self_block(const TapeParams& v, const std::string& p, Var x, std::size_t heads, std::size_t batch) {
    const Var xn = ln(v, p + "ln1.", x);
    x = add(x, attend(v, p + "attn.", xn, xn, heads, batch));
    return add(x, mlp(v, p + "ff.", ln(v, p + "ln2.", x)));
}

Var cross_block(const TapeParams& v, const std::string& p, Var x, Var kv, std::size_t heads, std::size_t batch) {
    x = add(x, attend(v, p + "attn.", ln(v, p + "ln1.", x), ln(v, p + "ln_kv.", kv), heads, batch));
    return add(x, mlp(v, p + "ff.", ln(v, p + "ln2.", x)));
}

Var tiled_pe(Tape& tape, std::size_t len, std::size_t d, std::size_t batch) {
    const Tensor pe = positional_embedding(len, d);
    Tensor tiled({batch * len, d});
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy(pe.values().begin(), pe.values().end(), tiled.values().begin() + static_cast<std::ptrdiff_t>(b * len * d));
    }
    return tape.constant(std::move(tiled));
}

// Appends the class token after each item's `len` rows: (batch*len) -> (batch*(len+1)).
Var append_token(Var seq, Var token, std::size_t len, std::size_t batch) {
    const Var stacked = nn::concat({seq, token}, 0);
    std::vector<std::size_t> idx;
    idx.reserve(batch * (len + 1));
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < len; ++t) idx.push_back(b * len + t);
        idx.push_back(batch * len);
    }
    return gather_rows(stacked, idx);
}

Var take_token(Var seq, std::size_t len_with_token, std::size_t batch) {
    std::vector<std::size_t> idx(batch);
    for (std::size_t b = 0; b < batch; ++b) idx[b] = b * len_with_token + len_with_token - 1;
    return gather_rows(seq, idx);
}

Var encode(Tape& tape, const TapeParams& vars, const std::string& prefix, const InputStats& stats,
           const std::vector<double>& rows, std::size_t count, std::size_t features) {
    if (rows.size() != count * features) throw ShapeError("encode: feature block size mismatch");
    Tensor x({count, features});
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t f = 0; f < features; ++f) {
            x.at(r, f) = (rows[r * features + f] - stats.mean[f]) / stats.std[f];
        }
    }
    return mlp(vars, prefix, tape.constant(std::move(x)));
}

}  // namespace

Var encode_observed(Tape& tape, const SawParams& params, const TapeParams& vars, const std::vector<double>& obs_rows,
                    std::size_t rows) {
    return encode(tape, vars, "enc_obs.", params.obs_input, obs_rows, rows, params.config.features());
}

Var encode_reference(Tape& tape, const SawParams& params, const TapeParams& vars, const std::vector<double>& ref_rows,
                     std::size_t rows) {
    return encode(tape, vars, "enc_ref.", params.ref_input, ref_rows, rows, params.config.features());
}

Var forward_outputs(Tape& tape, const SawParams& params, const TapeParams& vars, const FeatureBatch& batch) {
    const SawConfig& c = params.config;
    const std::size_t B = batch.batch;
    if (B == 0) throw ShapeError("forward: empty batch");
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto heads = static_cast<std::size_t>(c.n_heads);
    const auto To = static_cast<std::size_t>(c.T_o);
    const auto Tf = static_cast<std::size_t>(c.T_f);
    const Variant v = c.variant;

    std::optional<Var> e_obs, e_ref;
    if (uses_obs_encoder(v)) e_obs = encode_observed(tape, params, vars, batch.obs, B * To);
    if (uses_ref_encoder(v)) e_ref = encode_reference(tape, params, vars, batch.ref, B * Tf);

    // Position-encoded sequences as used for keys/values or as main streams.
    auto with_pe = [&](Var e, std::size_t len, bool pe) { return pe ? add(e, tiled_pe(tape, len, d, B)) : e; };

    auto run_stream = [&](Var e, const char* cls, const char* stack, std::size_t len, bool pe) {
        Var x = append_token(e, vars[cls], len, B);
        if (pe) x = add(x, tiled_pe(tape, len + 1, d, B));
        for (int i = 0; i < c.n_self_layers; ++i) x = self_block(vars, layer_prefix(stack, i), x, heads, B);
        return x;
    };

    Var features;
    switch (v) {
        case Variant::kFull:
        case Variant::kNoRef: {
            Var x = run_stream(*e_obs, "cls_obs", "self_obs", To, true);
            if (v == Variant::kFull) {
                const Var kv = with_pe(*e_ref, Tf, c.add_pe_to_reference);
                for (int i = 0; i < c.n_cross_layers; ++i) x = cross_block(vars, layer_prefix("cross", i), x, kv, heads, B);
            }
            features = ln(vars, "final_ln_obs.", take_token(x, To + 1, B));
            break;
        }
        case Variant::kNoObs:
        case Variant::kInverted: {
            Var x = run_stream(*e_ref, "cls_ref", "self_ref", Tf, c.add_pe_to_reference);
            if (v == Variant::kInverted) {
                const Var kv = with_pe(*e_obs, To, true);
                for (int i = 0; i < c.n_cross_layers; ++i) x = cross_block(vars, layer_prefix("cross", i), x, kv, heads, B);
            }
            features = ln(vars, "final_ln_ref.", take_token(x, Tf + 1, B));
            break;
        }
        case Variant::kNoCrossAttn: {
            const Var xo = run_stream(*e_obs, "cls_obs", "self_obs", To, true);
            const Var xr = run_stream(*e_ref, "cls_ref", "self_ref", Tf, c.add_pe_to_reference);
            features = nn::concat({ln(vars, "final_ln_obs.", take_token(xo, To + 1, B)),
                               ln(vars, "final_ln_ref.", take_token(xr, Tf + 1, B))},
                              1);
            break;
        }
    }
    return mlp(vars, "head.", features);
}

Var loss(Var outputs, const std::vector<ScoreVector>& targets, const NormStats& norm) {
    const std::size_t B = outputs.rows();
    if (targets.size() != B || outputs.cols() != 1 + ScoreVector::kRegression) {
        throw ShapeError("loss: outputs " + nn::shape_str(outputs.shape()) + " vs " + std::to_string(targets.size()) +
                         " targets");
    }
    std::vector<double> fall(B);
    Tensor reg({B, ScoreVector::kRegression});
    for (std::size_t b = 0; b < B; ++b) {
        fall[b] = targets[b].fall;
        const auto r = targets[b].regression();
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (!std::isfinite(r[i])) throw InputError("loss: non-finite target");
            reg.at(b, i) = (r[i] - norm.mean[i]) / norm.std[i];
        }
    }
    const Var bce = nn::bce_with_logits(slice(outputs, 1, 0, 1), fall);
    return add(bce, nn::mse(slice(outputs, 1, 1, ScoreVector::kRegression), reg));
}

double loss(const std::vector<ScorePrediction>& preds, const std::vector<ScoreVector>& targets, const NormStats& norm) {
    if (preds.size() != targets.size() || preds.empty()) throw ShapeError("loss: batch size mismatch");
    Tape tape;
    Tensor out({preds.size(), 1 + ScoreVector::kRegression});
    for (std::size_t b = 0; b < preds.size(); ++b) {
        out.at(b, 0) = preds[b].fall_logit;
        for (std::size_t i = 0; i < ScoreVector::kRegression; ++i) out.at(b, 1 + i) = preds[b].standardized[i];
    }
    return loss(tape.constant(std::move(out)), targets, norm).value()[0];
}

std::vector<ScorePrediction> forward(const SawParams& params, const std::vector<const ObservationWindow*>& obs,
                                     const std::vector<const ReferenceWindow*>& ref) {
    const FeatureBatch batch = make_batch(params.config, obs, ref);
    Tape tape;
    const TapeParams vars = attach(tape, params, false);
    const Tensor& out = forward_outputs(tape, params, vars, batch).value();
    std::vector<ScorePrediction> preds(batch.batch);
    for (std::size_t b = 0; b < batch.batch; ++b) {
        ScorePrediction& p = preds[b];
        p.fall_logit = out.at(b, 0);
        p.fall_prob = 1.0 / (1.0 + std::exp(-p.fall_logit));
        std::array<double, ScoreVector::kRegression> raw{};
        for (std::size_t i = 0; i < raw.size(); ++i) {
            p.standardized[i] = out.at(b, 1 + i);
            raw[i] = std::max(0.0, p.standardized[i] * params.target_norm.std[i] + params.target_norm.mean[i]);
        }
        p.scores.set_regression(raw);
        p.scores.fall = p.fall_prob;
    }
    return preds;
}

ScorePrediction forward(const SawParams& params, const ObservationWindow& obs, const ReferenceWindow& ref) {
    return forward(params, {&obs}, {&ref}).front();
}

}  // namespace saw
