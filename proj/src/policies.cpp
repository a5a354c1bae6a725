#include "peda/policies.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "peda/optim.hpp"

namespace peda {

namespace {

using nn::Index;
using nn::Matrix;
using nn::Var;
using json = nlohmann::json;

std::string algo_name(Algo a) {
    switch (a) {
    case Algo::MORvS: return "morvs";
    case Algo::BC: return "bc";
    case Algo::MODT: return "modt";
    }
    return "?";
}

Algo parse_algo(std::string_view s) {
    if (s == "morvs") return Algo::MORvS;
    if (s == "bc") return Algo::BC;
    if (s == "modt") return Algo::MODT;
    throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

std::size_t pref_width(const PolicyKind& k, std::size_t n) { return k.preference_conditioned ? n : 0; }

std::size_t rtg_width(const PolicyKind& k, std::size_t n) { return k.rtg_mode == RtgMode::Vector ? n : 1; }

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw std::domain_error(std::string("non-finite ") + what);
    }
}

void put_row(Matrix& m, Index row, Index col, std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) m(row, col + static_cast<Index>(i)) = v[i];
}

// Trims a window to its last `k` timesteps.
WindowView last_k(const WindowView& w, std::size_t k) {
    if (w.states.size() <= k) return w;
    std::size_t drop = w.states.size() - k;
    WindowView out = w;
    out.states = w.states.subspan(drop);
    out.rtgs = w.rtgs.empty() ? w.rtgs : w.rtgs.subspan(drop);
    out.actions = w.actions.size() > drop ? w.actions.subspan(drop) : std::span<const Vec>{};
    out.first_timestep = w.first_timestep + drop;
    return out;
}

double bias_bound(const nn::ParamStore& store, const std::string& bias_name) {
    std::string w = bias_name.substr(0, bias_name.size() - 1) + "w";
    return 1.0 / std::sqrt(static_cast<double>(store.get(w).value.rows()));
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

std::string to_string(RtgMode mode) { return mode == RtgMode::Vector ? "vector" : "scalar"; }

RtgMode parse_rtg_mode(std::string_view name) {
    if (name == "vector") return RtgMode::Vector;
    if (name == "scalar") return RtgMode::Scalar;
    throw std::invalid_argument("unknown rtg mode '" + std::string(name) + "' (expected vector|scalar)");
}

std::string PolicyKind::name() const { return algo_name(algo) + (preference_conditioned ? "-p" : ""); }

PolicyKind PolicyKind::parse(std::string_view name, RtgMode mode) {
    PolicyKind k;
    std::string_view base = name;
    k.preference_conditioned = false;
    if (base.size() > 2 && base.substr(base.size() - 2) == "-p") {
        k.preference_conditioned = true;
        base.remove_suffix(2);
    }
    k.algo = parse_algo(base);
    k.rtg_mode = mode;
    return k;
}

PolicyConfig PolicyConfig::defaults_for(Algo algo) {
    PolicyConfig c;
    switch (algo) {
    case Algo::MORvS:
        c.context = 1;
        c.warmup_steps = 0;
        c.training_steps = 20'000;
        break;
    case Algo::BC:
        c.context = 20;
        c.warmup_steps = 4000;
        c.training_steps = 20'000;
        break;
    case Algo::MODT:
        c.context = 20;
        c.warmup_steps = 10'000;
        c.training_steps = 50'000;
        break;
    }
    return c;
}

void PolicyConfig::validate(Algo algo) const {
    if (context == 0) throw std::invalid_argument("context length K must be >= 1");
    if (algo == Algo::MORvS && context != 1) throw std::invalid_argument("MORvS requires context length K = 1");
    if (hidden_size == 0 || n_layer == 0 || batch_size == 0)
        throw std::invalid_argument("hidden_size, n_layer and batch_size must be positive");
    if (n_head == 0 || hidden_size % n_head != 0)
        throw std::invalid_argument("n_head must divide hidden_size");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
    if (!(learning_rate > 0.0) || !(weight_decay >= 0.0))
        throw std::invalid_argument("learning rate must be positive and weight decay non-negative");
    if (!(target_quantile > 0.0 && target_quantile <= 1.0))
        throw std::invalid_argument("target quantile must be in (0, 1]");
}

EnvDims EnvDims::of(const Environment& env) {
    return EnvDims{env.n_objectives(), env.state_dim(), env.action_dim(), env.horizon(), env.action_low(),
                   env.action_high()};
}

Vec rtg_features(const PolicyKind& kind, std::span<const double> rtg, std::size_t timestep, const Preference& pref,
                 const NormalizationStats& stats, std::size_t horizon) {
    if (rtg.size() != pref.size() || rtg.size() != stats.size())
        throw DimensionError("rtg, preference and stats sizes differ");
    Vec norm;
    if (kind.algo == Algo::MORvS) {
        double remaining = static_cast<double>(horizon > timestep ? horizon - timestep : 1);
        Vec avg(rtg.begin(), rtg.end());
        for (double& v : avg) v /= remaining;
        norm = normalize_return(avg, stats.scaled(static_cast<double>(std::max<std::size_t>(horizon, 1))));
    } else {
        norm = normalize_return(rtg, stats);
    }
    Vec weighted = weighted_rtg(norm, pref);
    if (kind.rtg_mode == RtgMode::Scalar) {
        double s = 0.0;
        for (double v : weighted) s += v;
        return {s};
    }
    return weighted;
}

Vec build_morvs_input(const PolicyKind& kind, std::span<const double> state, const Preference& pref,
                      std::span<const double> rtg) {
    std::size_t n = pref.size();
    if (rtg.size() != n) throw DimensionError("rtg has " + std::to_string(rtg.size()) + " entries, expected " +
                                              std::to_string(n));
    Vec out(state.begin(), state.end());
    if (kind.preference_conditioned) out.insert(out.end(), pref.weights().begin(), pref.weights().end());
    Vec weighted = weighted_rtg(rtg, pref);
    if (kind.rtg_mode == RtgMode::Scalar) {
        double s = 0.0;
        for (double v : weighted) s += v;
        out.push_back(s);
    } else {
        out.insert(out.end(), weighted.begin(), weighted.end());
    }
    return out;
}

std::size_t TokenWindow::padding_tokens() const {
    return 3 * static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{0}));
}

TokenWindow modt_tokenize(const PolicyKind& kind, const WindowView& window, const NormalizationStats& stats,
                          std::size_t horizon, std::size_t context, std::size_t action_dim) {
    if (window.pref == nullptr) throw std::invalid_argument("window has no preference");
    const Preference& pref = *window.pref;
    WindowView w = last_k(window, context);
    std::size_t n = pref.size();
    std::size_t L = w.states.size();
    if (L == 0) throw std::invalid_argument("empty window");
    if (w.rtgs.size() != L) throw DimensionError("window rtg count differs from state count");
    std::size_t sd = w.states[0].size();
    std::size_t ad = action_dim;
    std::size_t pw = pref_width(kind, n);

    TokenWindow t;
    auto K = static_cast<Index>(context);
    t.rtg = Matrix::Zero(K, static_cast<Index>(rtg_width(kind, n) + pw));
    t.state = Matrix::Zero(K, static_cast<Index>(sd + pw));
    t.action = Matrix::Zero(K, static_cast<Index>(ad + pw));
    t.timesteps.assign(context, 0);
    t.valid.assign(context, 0);
    std::size_t offset = context - L;
    for (std::size_t k = 0; k < L; ++k) {
        auto row = static_cast<Index>(offset + k);
        std::size_t ts = w.first_timestep + k;
        Vec g = rtg_features(kind, w.rtgs[k], ts, pref, stats, horizon);
        put_row(t.rtg, row, 0, g);
        put_row(t.state, row, 0, w.states[k]);
        if (k < w.actions.size()) {
            if (w.actions[k].size() != ad) throw DimensionError("action dimension mismatch");
            put_row(t.action, row, 0, w.actions[k]);
        }
        if (pw > 0) {
            put_row(t.rtg, row, static_cast<Index>(g.size()), pref.weights());
            put_row(t.state, row, static_cast<Index>(sd), pref.weights());
            put_row(t.action, row, static_cast<Index>(ad), pref.weights());
        }
        t.timesteps[offset + k] = static_cast<Index>(std::min(ts, horizon));
        t.valid[offset + k] = 1;
    }
    return t;
}

PolicyModel::PolicyModel(PolicyKind kind, PolicyConfig config, EnvDims dims, NormalizationStats stats)
    : kind_(kind), config_(config), dims_(std::move(dims)), stats_(std::move(stats)) {
    config_.validate(kind_.algo);
    if (dims_.n_obj == 0 || dims_.state_dim == 0 || dims_.action_dim == 0)
        throw DimensionError("model dimensions must be positive");
    if (dims_.action_low.size() != dims_.action_dim || dims_.action_high.size() != dims_.action_dim)
        throw DimensionError("action box does not match action dimension");
    if (kind_.uses_returns() && stats_.size() != dims_.n_obj)
        throw DimensionError("return-conditioned model needs normalization stats for every objective");

    auto h = static_cast<Index>(config_.hidden_size);
    auto linear = [&](const std::string& name, Index in, Index out) {
        params_.add(name + ".w", in, out);
        params_.add(name + ".b", 1, out);
    };
    auto norm = [&](const std::string& name, Index d) {
        params_.add(name + ".gain", 1, d);
        params_.add(name + ".shift", 1, d);
    };
    auto n = dims_.n_obj;
    auto pw = static_cast<Index>(pref_width(kind_, n));
    auto act = static_cast<Index>(dims_.action_dim);

    if (kind_.algo == Algo::MODT) {
        linear("embed.rtg", static_cast<Index>(rtg_width(kind_, n)) + pw, h);
        linear("embed.state", static_cast<Index>(dims_.state_dim) + pw, h);
        linear("embed.action", act + pw, h);
        params_.add("embed.time", static_cast<Index>(dims_.horizon) + 1, h);
        norm("embed.ln", h);
        for (std::size_t b = 0; b < config_.n_layer; ++b) {
            std::string p = "block" + std::to_string(b);
            norm(p + ".ln1", h);
            for (const char* proj : {"q", "k", "v", "o"}) linear(p + ".attn." + proj, h, h);
            norm(p + ".ln2", h);
            linear(p + ".mlp.fc", h, 4 * h);
            linear(p + ".mlp.proj", 4 * h, h);
        }
        norm("ln_f", h);
    } else {
        Index in = static_cast<Index>(input_width());
        for (std::size_t l = 0; l < config_.n_layer; ++l) {
            linear("mlp." + std::to_string(l), l == 0 ? in : h, h);
        }
    }
    linear("head", h, act);
    initialize(config_.seed);
}

void PolicyModel::initialize(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x1417));
    for (auto& p : params_.all()) {
        if (ends_with(p.name, ".w")) {
            params_.init_uniform(p, rng);
        } else if (ends_with(p.name, ".b")) {
            double bound = bias_bound(params_, p.name);
            for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-bound, bound);
        } else if (ends_with(p.name, ".gain")) {
            p.value.setOnes();
        } else if (ends_with(p.name, ".shift")) {
            p.value.setZero();
        } else {
            for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = 0.02 * rng.normal();
        }
    }
    params_.zero_grad();
}

std::size_t PolicyModel::input_width() const {
    std::size_t n = dims_.n_obj;
    std::size_t pw = pref_width(kind_, n);
    switch (kind_.algo) {
    case Algo::MORvS: return dims_.state_dim + pw + rtg_width(kind_, n);
    case Algo::BC: return config_.context * (dims_.state_dim + pw);
    case Algo::MODT: return 0;
    }
    return 0;
}

EncodedBatch PolicyModel::encode(std::span<const WindowView> windows) const {
    EncodedBatch out;
    out.size = windows.size();
    auto B = static_cast<Index>(windows.size());
    std::size_t n = dims_.n_obj;
    std::size_t K = config_.context;

    for (const auto& w : windows) {
        if (w.pref == nullptr || w.pref->size() != n)
            throw DimensionError("window preference does not match the model's objective count");
        if (w.states.empty()) throw std::invalid_argument("empty window");
        for (const auto& s : w.states) {
            if (s.size() != dims_.state_dim)
                throw DimensionError("state has " + std::to_string(s.size()) + " entries, model expects " +
                                     std::to_string(dims_.state_dim));
            require_finite(s, "state");
        }
        for (const auto& a : w.actions) {
            if (a.size() != dims_.action_dim) throw DimensionError("action dimension mismatch");
            require_finite(a, "action");
        }
        if (kind_.uses_returns()) {
            if (w.rtgs.size() != w.states.size()) throw DimensionError("window rtg count differs from state count");
            for (const auto& g : w.rtgs) {
                if (g.size() != n) throw DimensionError("rtg dimension mismatch");
                require_finite(g, "return-to-go");
            }
        }
    }

    if (kind_.algo == Algo::MODT) {
        std::size_t pw = pref_width(kind_, n);
        auto R = static_cast<Index>(windows.size() * K);
        out.rtg = Matrix::Zero(R, static_cast<Index>(rtg_width(kind_, n) + pw));
        out.state = Matrix::Zero(R, static_cast<Index>(dims_.state_dim + pw));
        out.action = Matrix::Zero(R, static_cast<Index>(dims_.action_dim + pw));
        out.timesteps.reserve(static_cast<std::size_t>(R));
        out.valid.reserve(static_cast<std::size_t>(R));
        for (Index b = 0; b < B; ++b) {
            TokenWindow t = modt_tokenize(kind_, windows[static_cast<std::size_t>(b)], stats_, dims_.horizon, K,
                                          dims_.action_dim);
            auto K_ = static_cast<Index>(K);
            out.rtg.middleRows(b * K_, K_) = t.rtg;
            out.state.middleRows(b * K_, K_) = t.state;
            out.action.middleRows(b * K_, K_) = t.action;
            out.timesteps.insert(out.timesteps.end(), t.timesteps.begin(), t.timesteps.end());
            out.valid.insert(out.valid.end(), t.valid.begin(), t.valid.end());
        }
        return out;
    }

    out.flat = Matrix::Zero(B, static_cast<Index>(input_width()));
    for (Index b = 0; b < B; ++b) {
        const WindowView& w = windows[static_cast<std::size_t>(b)];
        const Preference& pref = *w.pref;
        if (kind_.algo == Algo::MORvS) {
            std::size_t last = w.states.size() - 1;
            Vec g = rtg_features(kind_, w.rtgs[last], w.first_timestep + last, pref, stats_, dims_.horizon);
            // rtg_features already weights and scalarizes; lay out the row directly.
            Vec row(w.states[last].begin(), w.states[last].end());
            if (kind_.preference_conditioned) row.insert(row.end(), pref.weights().begin(), pref.weights().end());
            row.insert(row.end(), g.begin(), g.end());
            put_row(out.flat, b, 0, row);
        } else {
            WindowView t = last_k(w, K);
            std::size_t block = dims_.state_dim + pref_width(kind_, n);
            std::size_t offset = K - t.states.size();
            for (std::size_t k = 0; k < t.states.size(); ++k) {
                auto col = static_cast<Index>((offset + k) * block);
                put_row(out.flat, b, col, t.states[k]);
                if (kind_.preference_conditioned)
                    put_row(out.flat, b, col + static_cast<Index>(dims_.state_dim), pref.weights());
            }
        }
    }
    return out;
}

Var PolicyModel::mlp(nn::Tape& tape, Var x, bool train, Rng& rng) const {
    for (std::size_t l = 0; l < config_.n_layer; ++l) {
        std::string p = "mlp." + std::to_string(l);
        x = tape.affine(x, tape.param(params_.get(p + ".w")), tape.param(params_.get(p + ".b")));
        x = tape.relu(x);
        x = tape.dropout(x, config_.dropout, train, rng);
    }
    return x;
}

Var PolicyModel::squash(nn::Tape& tape, Var x) const {
    x = tape.affine(x, tape.param(params_.get("head.w")), tape.param(params_.get("head.b")));
    x = tape.tanh(x);
    Vec scale(dims_.action_dim), shift(dims_.action_dim);
    for (std::size_t i = 0; i < dims_.action_dim; ++i) {
        scale[i] = 0.5 * (dims_.action_high[i] - dims_.action_low[i]);
        shift[i] = 0.5 * (dims_.action_high[i] + dims_.action_low[i]);
    }
    return tape.scale_shift_cols(x, scale, shift);
}

Var PolicyModel::forward(nn::Tape& tape, const EncodedBatch& batch, bool train, Rng& dropout_rng) {
    if (kind_.algo != Algo::MODT) {
        Var x = tape.constant(batch.flat);
        return squash(tape, mlp(tape, x, train, dropout_rng));
    }

    auto P = [&](const std::string& name) { return tape.param(params_.get(name)); };
    auto lin = [&](Var x, const std::string& name) { return tape.affine(x, P(name + ".w"), P(name + ".b")); };
    auto ln = [&](Var x, const std::string& name) { return tape.layer_norm(x, P(name + ".gain"), P(name + ".shift")); };

    Var time = tape.gather_rows(P("embed.time"), batch.timesteps);
    Var g = tape.add(lin(tape.constant(batch.rtg), "embed.rtg"), time);
    Var s = tape.add(lin(tape.constant(batch.state), "embed.state"), time);
    Var a = tape.add(lin(tape.constant(batch.action), "embed.action"), time);
    std::array<Var, 3> parts{g, s, a};
    Var x = tape.interleave_rows(parts);

    std::vector<std::uint8_t> valid;
    valid.reserve(batch.valid.size() * 3);
    for (auto v : batch.valid) valid.insert(valid.end(), 3, v);
    std::size_t seq = 3 * config_.context;

    x = tape.dropout(ln(x, "embed.ln"), config_.dropout, train, dropout_rng);
    for (std::size_t b = 0; b < config_.n_layer; ++b) {
        std::string p = "block" + std::to_string(b);
        nn::AttentionWeights w{P(p + ".attn.q.w"), P(p + ".attn.q.b"), P(p + ".attn.k.w"), P(p + ".attn.k.b"),
                               P(p + ".attn.v.w"), P(p + ".attn.v.b"), P(p + ".attn.o.w"), P(p + ".attn.o.b")};
        Var att = nn::causal_self_attention(tape, ln(x, p + ".ln1"), w, seq, config_.n_head, valid);
        x = tape.add(x, tape.dropout(att, config_.dropout, train, dropout_rng));
        Var m = tape.relu(lin(ln(x, p + ".ln2"), p + ".mlp.fc"));
        m = lin(m, p + ".mlp.proj");
        x = tape.add(x, tape.dropout(m, config_.dropout, train, dropout_rng));
    }
    x = ln(x, "ln_f");

    std::vector<Index> state_rows(batch.valid.size());
    for (std::size_t r = 0; r < state_rows.size(); ++r) state_rows[r] = static_cast<Index>(3 * r + 1);
    return squash(tape, tape.select_rows(x, state_rows));
}

Vec PolicyModel::predict_action(const WindowView& window) const {
    std::array<WindowView, 1> one{window};
    EncodedBatch batch = encode(one);
    nn::Tape tape;
    Rng unused(0);
    Var out = const_cast<PolicyModel*>(this)->forward(tape, batch, false, unused);
    const Matrix& v = tape.value(out);
    Index row = v.rows() - 1;
    Vec action(static_cast<std::size_t>(v.cols()));
    for (Index j = 0; j < v.cols(); ++j) action[static_cast<std::size_t>(j)] = v(row, j);
    return action;
}

void PolicyModel::quantize_to_f32() {
    for (auto& p : params_.all()) {
        for (Index i = 0; i < p.value.size(); ++i)
            p.value.data()[i] = static_cast<double>(static_cast<float>(p.value.data()[i]));
    }
}

EnvDims dataset_dims(const Dataset& dataset) {
    if (dataset.meta.env_id.empty()) throw DimensionError("dataset does not record its environment");
    std::size_t horizon = dataset.meta.horizon;
    if (horizon == 0) {
        for (const auto& t : dataset.trajectories) horizon = std::max(horizon, t.steps.size());
    }
    Environment env = Environment::from_id(dataset.meta.env_id, horizon).with_params_json(dataset.meta.env_params_json);
    EnvDims dims = EnvDims::of(env);
    if (dims.n_obj != dataset.n_obj || dims.state_dim != dataset.state_dim || dims.action_dim != dataset.action_dim)
        throw DimensionError("dataset dimensions disagree with its recorded environment " + dataset.meta.env_id);
    return dims;
}

TrainResult train(const Dataset& dataset, const PolicyKind& kind, const PolicyConfig& config,
                  const TrainOptions& options) {
    if (dataset.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    return train(dataset, kind, config, dataset_dims(dataset), options);
}

TrainResult train(const Dataset& dataset, const PolicyKind& kind, const PolicyConfig& config, const EnvDims& dims,
                  const TrainOptions& options) {
    if (dataset.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    dataset.validate();
    if (dims.n_obj != dataset.n_obj || dims.state_dim != dataset.state_dim || dims.action_dim != dataset.action_dim)
        throw DimensionError("dataset dimensions do not match the environment");

    NormalizationStats stats = dataset.stats.size() == dataset.n_obj ? dataset.stats : dataset_stats(dataset);
    PolicyModel model(kind, config, dims, stats);

    struct Prepared {
        const Preference* pref;
        std::vector<Vec> states, actions, rtgs;
    };
    std::vector<Prepared> data;
    data.reserve(dataset.trajectories.size());
    for (const auto& t : dataset.trajectories) {
        if (t.steps.empty()) continue;
        Prepared p{&t.preference, {}, {}, compute_rtg(t)};
        for (const auto& s : t.steps) {
            p.states.push_back(s.state);
            p.actions.push_back(s.action);
        }
        data.push_back(std::move(p));
    }
    if (data.empty()) throw std::invalid_argument("dataset has no non-empty trajectories");

    nn::AdamWConfig opt_cfg;
    opt_cfg.learning_rate = config.learning_rate;
    opt_cfg.weight_decay = config.weight_decay;
    opt_cfg.warmup_steps = config.warmup_steps;
    nn::AdamW opt(model.params(), opt_cfg);

    Rng batch_rng(mix_seed(config.seed, 0xba7c));
    Rng dropout_rng(mix_seed(config.seed, 0xd409));
    const std::size_t K = config.context;
    const bool all_positions = kind.algo == Algo::MODT;
    const auto act = static_cast<Index>(dims.action_dim);

    std::vector<double> loss_log;
    loss_log.reserve(config.training_steps);
    std::vector<WindowView> windows(config.batch_size);
    for (std::size_t step = 1; step <= config.training_steps; ++step) {
        Matrix targets = Matrix::Zero(static_cast<Index>(config.batch_size * (all_positions ? K : 1)), act);
        std::vector<std::uint8_t> mask;
        if (all_positions) mask.assign(config.batch_size * K, 0);
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const Prepared& p = data[batch_rng.index(data.size())];
            std::size_t end = batch_rng.index(p.states.size());
            std::size_t start = end + 1 >= K ? end + 1 - K : 0;
            std::size_t len = end + 1 - start;
            WindowView& w = windows[b];
            w.pref = p.pref;
            w.states = std::span<const Vec>(p.states).subspan(start, len);
            w.actions = std::span<const Vec>(p.actions).subspan(start, len);
            w.rtgs = std::span<const Vec>(p.rtgs).subspan(start, len);
            w.first_timestep = start;
            if (all_positions) {
                std::size_t offset = K - len;
                for (std::size_t k = 0; k < len; ++k) {
                    auto row = static_cast<Index>(b * K + offset + k);
                    put_row(targets, row, 0, p.actions[start + k]);
                    mask[b * K + offset + k] = 1;
                }
            } else {
                put_row(targets, static_cast<Index>(b), 0, p.actions[end]);
            }
        }
        EncodedBatch batch = model.encode(windows);
        nn::Tape tape;
        Var pred = model.forward(tape, batch, true, dropout_rng);
        Var loss = tape.mse(pred, tape.constant(std::move(targets)), mask);
        double value = tape.value(loss)(0, 0);
        if (!std::isfinite(value))
            throw TrainingDiverged(step, "non-finite loss at step " + std::to_string(step));
        tape.backward(loss);
        try {
            opt.step(model.params());
        } catch (const nn::NonFiniteGradient& e) {
            throw TrainingDiverged(step, "non-finite gradient at step " + std::to_string(step) + ": " + e.what());
        }
        model.params().zero_grad();
        loss_log.push_back(value);
        if (options.progress && options.progress_every > 0 && step % options.progress_every == 0)
            options.progress(step, value);
    }

    model.quantize_to_f32();
    if (options.fit_target && kind.uses_returns()) model.target = fit_target(dataset, config.target_quantile);
    return TrainResult{std::move(model), std::move(loss_log)};
}

namespace {

json target_json(const ReturnTargetModel& t) {
    return json{{"coefficients", t.coefficients}, {"intercept", t.intercept}, {"fit_quantile", t.fit_quantile}};
}

ReturnTargetModel target_from_json(const json& j) {
    ReturnTargetModel t;
    t.coefficients = j.at("coefficients").get<std::vector<Vec>>();
    t.intercept = j.at("intercept").get<Vec>();
    t.fit_quantile = j.at("fit_quantile").get<double>();
    return t;
}

constexpr const char* kManifestFile = "model.json";
constexpr const char* kBlobFile = "params.bin";

} // namespace

std::string target_to_json(const ReturnTargetModel& target) { return target_json(target).dump(2); }

void save_model(const PolicyModel& model, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ModelError(ModelError::Code::Io, "cannot create " + dir.string() + ": " + ec.message());

    const auto& k = model.kind();
    const auto& c = model.config();
    const auto& d = model.dims();
    json params = json::array();
    std::size_t floats = 0;
    for (const auto& p : model.params().all()) {
        params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
        floats += static_cast<std::size_t>(p.value.size());
    }
    json m{
        {"format_version", kModelFormatVersion},
        {"kind", {{"algo", algo_name(k.algo)}, {"preference_conditioned", k.preference_conditioned},
                  {"rtg_mode", to_string(k.rtg_mode)}, {"name", k.name()}}},
        {"config", {{"hidden_size", c.hidden_size}, {"n_layer", c.n_layer}, {"n_head", c.n_head},
                    {"context", c.context}, {"batch_size", c.batch_size}, {"dropout", c.dropout},
                    {"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
                    {"warmup_steps", c.warmup_steps}, {"training_steps", c.training_steps}, {"seed", c.seed},
                    {"target_quantile", c.target_quantile}}},
        {"dims", {{"n_obj", d.n_obj}, {"state_dim", d.state_dim}, {"action_dim", d.action_dim},
                  {"horizon", d.horizon}, {"action_low", d.action_low}, {"action_high", d.action_high}}},
        {"stats", {{"min", model.stats().min}, {"max", model.stats().max}}},
        {"target", model.target ? target_json(*model.target) : json(nullptr)},
        {"params", params},
        {"blob_file", kBlobFile},
        {"blob_length", floats * 4},
    };

    std::string bytes;
    bytes.reserve(floats * 4);
    for (const auto& p : model.params().all()) {
        for (Index i = 0; i < p.value.size(); ++i) {
            auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(p.value.data()[i]));
            for (int s = 0; s < 32; s += 8) bytes.push_back(static_cast<char>((bits >> s) & 0xff));
        }
    }
    std::ofstream blob(dir / kBlobFile, std::ios::binary);
    blob.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    std::ofstream man(dir / kManifestFile);
    man << m.dump(2) << '\n';
    if (!blob || !man) throw ModelError(ModelError::Code::Io, "failed writing model to " + dir.string());
}

PolicyModel load_model(const std::filesystem::path& dir) {
    std::ifstream in(dir / kManifestFile);
    if (!in) throw ModelError(ModelError::Code::Io, "cannot open " + (dir / kManifestFile).string());
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw ModelError(ModelError::Code::Malformed, std::string("model manifest is not valid JSON: ") + e.what());
    }

    int version = m.value("format_version", -1);
    if (version != kModelFormatVersion)
        throw ModelError(ModelError::Code::BadVersion, "unsupported model format version " + std::to_string(version) +
                                                           " (expected " + std::to_string(kModelFormatVersion) + ")");

    std::optional<PolicyModel> model;
    std::size_t declared = 0;
    try {
        const json& jk = m.at("kind");
        PolicyKind kind;
        kind.algo = parse_algo(jk.at("algo").get<std::string>());
        kind.preference_conditioned = jk.at("preference_conditioned").get<bool>();
        kind.rtg_mode = parse_rtg_mode(jk.at("rtg_mode").get<std::string>());

        const json& jc = m.at("config");
        PolicyConfig c;
        c.hidden_size = jc.at("hidden_size");
        c.n_layer = jc.at("n_layer");
        c.n_head = jc.at("n_head");
        c.context = jc.at("context");
        c.batch_size = jc.at("batch_size");
        c.dropout = jc.at("dropout");
        c.learning_rate = jc.at("learning_rate");
        c.weight_decay = jc.at("weight_decay");
        c.warmup_steps = jc.at("warmup_steps");
        c.training_steps = jc.at("training_steps");
        c.seed = jc.at("seed");
        c.target_quantile = jc.at("target_quantile");

        const json& jd = m.at("dims");
        EnvDims d{jd.at("n_obj"), jd.at("state_dim"), jd.at("action_dim"), jd.at("horizon"),
                  jd.at("action_low").get<Vec>(), jd.at("action_high").get<Vec>()};
        NormalizationStats stats{m.at("stats").at("min").get<Vec>(), m.at("stats").at("max").get<Vec>()};

        model.emplace(kind, c, d, stats);
        if (!m.at("target").is_null()) model->target = target_from_json(m.at("target"));
        declared = m.at("blob_length").get<std::size_t>();

        const json& jp = m.at("params");
        const auto& all = model->params().all();
        if (jp.size() != all.size())
            throw ModelError(ModelError::Code::Malformed, "manifest lists " + std::to_string(jp.size()) +
                                                              " parameters, architecture has " +
                                                              std::to_string(all.size()));
        for (std::size_t i = 0; i < all.size(); ++i) {
            if (jp[i].at("name").get<std::string>() != all[i].name || jp[i].at("rows").get<Index>() != all[i].value.rows() ||
                jp[i].at("cols").get<Index>() != all[i].value.cols())
                throw ModelError(ModelError::Code::Malformed, "parameter " + all[i].name + " does not match manifest");
        }
    } catch (const json::exception& e) {
        throw ModelError(ModelError::Code::Malformed, std::string("malformed model manifest: ") + e.what());
    }

    std::size_t expected = model->params().total_size() * 4;
    if (declared != expected)
        throw ModelError(ModelError::Code::BlobLength, "manifest blob length " + std::to_string(declared) +
                                                           " does not match parameter count (" +
                                                           std::to_string(expected) + " bytes)");
    std::ifstream blob(dir / kBlobFile, std::ios::binary);
    if (!blob) throw ModelError(ModelError::Code::Io, "cannot open " + (dir / kBlobFile).string());
    std::string bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
    if (bytes.size() != expected)
        throw ModelError(ModelError::Code::BlobLength, "parameter blob has " + std::to_string(bytes.size()) +
                                                           " bytes, expected " + std::to_string(expected));
    std::size_t pos = 0;
    for (auto& p : model->params().all()) {
        for (Index i = 0; i < p.value.size(); ++i) {
            std::uint32_t bits = 0;
            for (int s = 0; s < 4; ++s)
                bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * s);
            p.value.data()[i] = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    return std::move(*model);
}

} // namespace peda
