#include "peda/envs.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "peda/prefs.hpp"
#include "peda/rng.hpp"

namespace peda {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double sq_dist(const std::array<double, 2>& p, const std::array<double, 2>& g) {
    const double dx = p[0] - g[0];
    const double dy = p[1] - g[1];
    return dx * dx + dy * dy;
}

} // namespace

Environment::Environment(EnvKind kind, std::size_t horizon) : kind_(std::move(kind)), horizon_(horizon) {
    if (horizon_ == 0) {
        throw std::invalid_argument("Environment: horizon must be at least 1");
    }
    std::visit(overloaded{
                   [&](const AllocateParams& a) {
                       if (a.coefficients.size() < 2) {
                           throw std::invalid_argument("Allocate: need at least two objectives");
                       }
                       for (double c : a.coefficients) {
                           if (!(c > 0.0) || !std::isfinite(c)) {
                               throw std::invalid_argument("Allocate: coefficients must be positive");
                           }
                       }
                       low_.assign(a.coefficients.size(), 0.0);
                       high_.assign(a.coefficients.size(), 1.0);
                   },
                   [&](const Goal2DParams& g) {
                       if (g.goal1 == g.goal2) {
                           throw std::invalid_argument("Goal2D: goals must differ");
                       }
                       if (!(g.arena_scale > 0.0) || !(g.max_speed > 0.0)) {
                           throw std::invalid_argument("Goal2D: arena scale and speed must be positive");
                       }
                       low_.assign(2, -1.0);
                       high_.assign(2, 1.0);
                   }},
               kind_);
}

Environment Environment::from_id(std::string_view id, std::size_t horizon) {
    if (id == "allocate2") return Environment(AllocateParams{{1.0, 1.0}}, horizon);
    if (id == "allocate3") return Environment(AllocateParams{{1.0, 1.0, 1.0}}, horizon);
    if (id == "goal2d") return Environment(Goal2DParams{}, horizon);
    throw std::invalid_argument("unknown environment '" + std::string(id) +
                                "' (expected allocate2|allocate3|goal2d)");
}

std::string Environment::id() const {
    return std::visit(overloaded{[](const AllocateParams& a) {
                                     return "allocate" + std::to_string(a.coefficients.size());
                                 },
                                 [](const Goal2DParams&) { return std::string("goal2d"); }},
                      kind_);
}

std::string Environment::params_json() const {
    nlohmann::json j;
    std::visit(overloaded{[&](const AllocateParams& a) { j["coefficients"] = a.coefficients; },
                          [&](const Goal2DParams& g) {
                              j["goal1"] = g.goal1;
                              j["goal2"] = g.goal2;
                              j["arena_scale"] = g.arena_scale;
                              j["max_speed"] = g.max_speed;
                          }},
               kind_);
    return j.dump();
}

Environment Environment::with_params_json(std::string_view text) const {
    const auto j = nlohmann::json::parse(text);
    EnvKind kind = kind_;
    std::visit(overloaded{[&](AllocateParams& a) {
                              if (j.contains("coefficients")) {
                                  auto c = j.at("coefficients").get<Vec>();
                                  if (c.size() != a.coefficients.size()) {
                                      throw DimensionError("coefficients: expected " +
                                                           std::to_string(a.coefficients.size()) +
                                                           " values");
                                  }
                                  a.coefficients = std::move(c);
                              }
                          },
                          [&](Goal2DParams& g) {
                              if (j.contains("goal1")) g.goal1 = j.at("goal1").get<std::array<double, 2>>();
                              if (j.contains("goal2")) g.goal2 = j.at("goal2").get<std::array<double, 2>>();
                              if (j.contains("arena_scale")) g.arena_scale = j.at("arena_scale").get<double>();
                              if (j.contains("max_speed")) g.max_speed = j.at("max_speed").get<double>();
                          }},
               kind);
    return Environment(std::move(kind), horizon_);
}

std::size_t Environment::n_objectives() const {
    return std::visit(overloaded{[](const AllocateParams& a) { return a.coefficients.size(); },
                                 [](const Goal2DParams&) { return std::size_t{2}; }},
                      kind_);
}

std::size_t Environment::state_dim() const {
    return std::visit(overloaded{[](const AllocateParams& a) { return 1 + a.coefficients.size(); },
                                 [](const Goal2DParams&) { return std::size_t{5}; }},
                      kind_);
}

std::size_t Environment::action_dim() const {
    return low_.size();
}

MOMDPSpec Environment::spec() const {
    return MOMDPSpec{n_objectives(), state_dim(), action_dim(), horizon_, 1.0};
}

Vec Environment::observe(const EnvState& s) const {
    const double T = static_cast<double>(horizon_);
    const double tau = static_cast<double>(s.step_index) / T;
    return std::visit(overloaded{[&](const AllocateParams& a) {
                                     Vec obs{tau};
                                     for (std::size_t i = 0; i < a.coefficients.size(); ++i) {
                                         obs.push_back(s.cumulative[i] / (a.coefficients[i] * T));
                                     }
                                     return obs;
                                 },
                                 [&](const Goal2DParams&) {
                                     return Vec{s.position[0], s.position[1], tau,
                                                s.cumulative[0] / T, s.cumulative[1] / T};
                                 }},
                      kind_);
}

EnvState Environment::reset(std::uint64_t seed) const {
    EnvState s;
    s.cumulative.assign(n_objectives(), 0.0);
    if (std::holds_alternative<Goal2DParams>(kind_)) {
        Rng rng(seed);
        s.position[0] = rng.uniform(-0.1, 0.1);
        s.position[1] = rng.uniform(-0.1, 0.1);
    }
    s.observation = observe(s);
    return s;
}

Vec Environment::clamp_action(std::span<const double> action) const {
    if (action.size() != action_dim()) {
        throw DimensionError("Environment::step: action has " + std::to_string(action.size()) +
                             " components, expected " + std::to_string(action_dim()));
    }
    Vec a(action.begin(), action.end());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i])) {
            throw std::invalid_argument("Environment::step: NaN action");
        }
        a[i] = std::clamp(a[i], low_[i], high_[i]);
    }
    return a;
}

StepResult Environment::step(const EnvState& state, std::span<const double> action) const {
    if (state.done) {
        throw EnvError("Environment::step: episode already finished");
    }
    const Vec a = clamp_action(action);
    StepResult out;
    out.state = state;
    std::visit(overloaded{[&](const AllocateParams& p) {
                              double sum = 0.0;
                              for (double v : a) sum += v;
                              const double denom = std::max(1.0, sum);
                              out.reward.resize(a.size());
                              for (std::size_t i = 0; i < a.size(); ++i) {
                                  out.reward[i] = p.coefficients[i] * std::sqrt(a[i] / denom);
                              }
                          },
                          [&](const Goal2DParams& g) {
                              const double norm = std::hypot(a[0], a[1]);
                              const double denom = std::max(1.0, norm);
                              auto& pos = out.state.position;
                              pos[0] += g.max_speed * a[0] / denom;
                              pos[1] += g.max_speed * a[1] / denom;
                              const double d2 = g.arena_scale * g.arena_scale;
                              out.reward = {std::max(0.0, 1.0 - sq_dist(pos, g.goal1) / d2),
                                            std::max(0.0, 1.0 - sq_dist(pos, g.goal2) / d2)};
                          }},
               kind_);
    for (std::size_t i = 0; i < out.reward.size(); ++i) {
        out.state.cumulative[i] += out.reward[i];
    }
    out.state.step_index += 1;
    out.state.done = out.state.step_index >= horizon_;
    out.state.observation = observe(out.state);
    out.done = out.state.done;
    return out;
}

Vec Environment::expert_action(const EnvState& state, const Preference& pref) const {
    if (pref.size() != n_objectives()) {
        throw DimensionError("expert_action: preference dimension");
    }
    return std::visit(
        overloaded{[&](const AllocateParams& p) {
                       Vec a(pref.size());
                       double total = 0.0;
                       for (std::size_t i = 0; i < a.size(); ++i) {
                           const double wc = pref[i] * p.coefficients[i];
                           a[i] = wc * wc;
                           total += a[i];
                       }
                       for (double& v : a) v /= total;
                       return a;
                   },
                   [&](const Goal2DParams& g) {
                       const double wsum = pref[0] + pref[1];
                       const double tx = (pref[0] * g.goal1[0] + pref[1] * g.goal2[0]) / wsum;
                       const double ty = (pref[0] * g.goal1[1] + pref[1] * g.goal2[1]) / wsum;
                       Vec a{(tx - state.position[0]) / g.max_speed,
                             (ty - state.position[1]) / g.max_speed};
                       const double norm = std::hypot(a[0], a[1]);
                       if (norm > 1.0) {
                           a[0] /= norm;
                           a[1] /= norm;
                       }
                       return a;
                   }},
        kind_);
}

Vec Environment::expert_return(const Preference& pref, std::uint64_t seed) const {
    EnvState s = reset(seed);
    Vec total(n_objectives(), 0.0);
    while (!s.done) {
        auto r = step(s, expert_action(s, pref));
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += r.reward[i];
        s = std::move(r.state);
    }
    return total;
}

std::vector<Vec> Environment::analytic_front(std::size_t grid_size) const {
    if (grid_size < 2) {
        throw std::invalid_argument("analytic_front: grid_size must be at least 2");
    }
    const double T = static_cast<double>(horizon_);
    std::vector<Vec> front;
    if (const auto* p = std::get_if<AllocateParams>(&kind_)) {
        for (const auto& alloc : simplex_grid(p->coefficients.size(), grid_size)) {
            Vec g(alloc.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] = T * p->coefficients[i] * std::sqrt(alloc[i]);
            }
            front.push_back(std::move(g));
        }
        return front;
    }
    if (std::holds_alternative<Goal2DParams>(kind_)) {
        for (const auto& pref : simplex_grid(2, grid_size)) {
            front.push_back(expert_return(pref, 0));
        }
        return front;
    }
    throw std::invalid_argument("analytic_front: unsupported environment");
}

} // namespace peda
