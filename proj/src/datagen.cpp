#include "peda/datagen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

namespace peda {

std::size_t default_ensemble_size(std::size_t n_obj) {
    return n_obj == 3 ? 66 : 101;
}

BehavioralEnsemble build_ensemble(const Environment& env, std::size_t size, std::size_t probe_reps,
                                  std::uint64_t seed) {
    if (size == 0) {
        throw std::invalid_argument("build_ensemble: ensemble size must be at least 1");
    }
    const std::size_t n = env.n_objectives();
    std::vector<Preference> targets;
    if (size == 1) {
        targets.push_back(Preference::uniform(n));
    } else {
        targets = simplex_grid(n, size);
    }
    const std::size_t reps = std::max<std::size_t>(1, probe_reps);
    BehavioralEnsemble ensemble;
    for (std::size_t b = 0; b < targets.size(); ++b) {
        Vec mean(n, 0.0);
        for (std::size_t r = 0; r < reps; ++r) {
            const Vec g = env.expert_return(targets[b], mix_seed(seed, b, r, 0xe5));
            for (std::size_t i = 0; i < n; ++i) mean[i] += g[i] / static_cast<double>(reps);
        }
        double total = 0.0;
        for (double g : mean) total += g;
        if (!(total > 0.0)) {
            throw std::runtime_error("build_ensemble: member " + std::to_string(b) +
                                     " has zero expected return; estimated preference undefined");
        }
        for (double& g : mean) g /= total;
        ensemble.members.push_back({targets[b], Preference(std::move(mean))});
    }
    return ensemble;
}

std::size_t closest_agent(const BehavioralEnsemble& ensemble, const Preference& pref) {
    if (ensemble.members.empty()) {
        throw std::invalid_argument("closest_agent: empty ensemble");
    }
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t b = 0; b < ensemble.members.size(); ++b) {
        const auto& est = ensemble.members[b].estimated;
        if (est.size() != pref.size()) throw DimensionError("closest_agent: preference dimension");
        double d = 0.0;
        for (std::size_t i = 0; i < pref.size(); ++i) {
            const double diff = pref[i] - est[i];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = b;
        }
    }
    return best;
}

void AmateurConfig::validate() const {
    if (!(perturb_prob >= 0.0 && perturb_prob <= 1.0)) {
        throw std::invalid_argument("AmateurConfig: perturb_prob must lie in [0, 1]");
    }
    if (!(scale_low < scale_high)) {
        throw std::invalid_argument("AmateurConfig: scale range must satisfy low < high");
    }
}

Vec perturb_action(Rng& rng, std::span<const double> expert_action, const AmateurConfig& config,
                   std::span<const double> low, std::span<const double> high) {
    if (low.size() != expert_action.size() || high.size() != expert_action.size()) {
        throw DimensionError("perturb_action: action box dimension");
    }
    Vec a(expert_action.begin(), expert_action.end());
    const bool perturb = rng.uniform() < config.perturb_prob;
    if (perturb) {
        const double u = rng.uniform(config.scale_low, config.scale_high);
        for (double& v : a) v *= u;
    } else if (config.mode == AmateurConfig::Mode::MixedUniform) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(low[i], high[i]);
    }
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], low[i], high[i]);
    return a;
}

std::string to_string(Quality q) {
    return q == Quality::Expert ? "expert" : "amateur";
}

Quality parse_quality(std::string_view name) {
    if (name == "expert") return Quality::Expert;
    if (name == "amateur") return Quality::Amateur;
    throw std::invalid_argument("unknown quality '" + std::string(name) + "' (expected expert|amateur)");
}

void GenConfig::validate() const {
    if (n_traj == 0) throw std::invalid_argument("GenConfig: n_traj must be at least 1");
    if (quality == Quality::Amateur) amateur.validate();
}

Preference quantize_preference(const Preference& pref) {
    constexpr double kScale = 1048576.0;  // 2^20
    const std::size_t n = pref.size();
    std::vector<long long> q(n);
    long long sum = 0;
    std::size_t largest = 0;
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = std::llround(pref[i] * kScale);
        sum += q[i];
        if (pref[i] > pref[largest]) largest = i;
    }
    q[largest] += static_cast<long long>(kScale) - sum;
    Vec w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(q[i]) / kScale;
    return Preference(std::move(w));
}

namespace {

double f32(double v) {
    return static_cast<double>(static_cast<float>(v));
}

Vec f32(const Vec& v) {
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = f32(v[i]);
    return out;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Trajectory collect_one(const GenConfig& config, const BehavioralEnsemble& ensemble, std::size_t k) {
    const Environment& env = config.env;
    const std::size_t n = env.n_objectives();
    Rng rng(mix_seed(config.seed, k, 0));

    Preference pref;
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= kMaxConsecutiveRejections) {
            throw InfeasibleConstraint("collect: quantized preferences keep violating the constraint");
        }
        pref = quantize_preference(sample_pref(rng, config.pref_dist, n, config.constraint));
        if (config.constraint.accepts(pref)) break;
    }
    const Preference& policy_pref = ensemble.members[closest_agent(ensemble, pref)].target;

    Trajectory traj;
    traj.preference = pref;
    EnvState state = env.reset(mix_seed(config.seed, k, 1));
    while (!state.done) {
        Vec action = env.expert_action(state, policy_pref);
        if (config.quality == Quality::Amateur) {
            action = perturb_action(rng, action, config.amateur, env.action_low(), env.action_high());
        }
        action = f32(action);
        StepResult r = env.step(state, action);
        traj.steps.push_back(Step{f32(state.observation), std::move(action), f32(r.reward)});
        state = std::move(r.state);
    }
    return traj;
}

} // namespace

Dataset collect(const GenConfig& config) {
    const std::size_t size =
        config.ensemble_size == 0 ? default_ensemble_size(config.env.n_objectives()) : config.ensemble_size;
    return collect(config, build_ensemble(config.env, size, config.probe_reps, config.seed));
}

Dataset collect(const GenConfig& config, const BehavioralEnsemble& ensemble) {
    config.validate();
    const Environment& env = config.env;
    validate_constraint(config.constraint, env.n_objectives());

    Dataset ds;
    ds.n_obj = env.n_objectives();
    ds.state_dim = env.state_dim();
    ds.action_dim = env.action_dim();
    ds.trajectories.resize(config.n_traj);

    const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(config.n_traj)));
    std::vector<std::exception_ptr> errors(threads);
    auto work = [&](unsigned w) {
        try {
            for (std::size_t k = w; k < config.n_traj; k += threads) {
                ds.trajectories[k] = collect_one(config, ensemble, k);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    ds.stats = dataset_stats(ds);
    ds.meta.env_id = env.id();
    ds.meta.env_params_json = env.params_json();
    ds.meta.quality = to_string(config.quality);
    ds.meta.pref_dist = config.pref_dist.name();
    ds.meta.seed = config.seed;
    ds.meta.ensemble_size = ensemble.size();
    ds.meta.horizon = env.horizon();
    ds.meta.created = utc_timestamp();
    return ds;
}

} // namespace peda
