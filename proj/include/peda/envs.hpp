#pragma once

// Synthetic conflicting-objective environments with closed-form experts.
//
//   Allocate: each step splits a unit budget over n objectives; reward
//             r_i = c_i * sqrt(e_i) with e = a / max(1, sum a).
//   Goal2D:   a point mass pulled between two goals; reward
//             r_i = max(0, 1 - |p - g_i|^2 / D^2).

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "peda/core.hpp"

namespace peda {

struct AllocateParams {
    Vec coefficients{1.0, 1.0};
};

struct Goal2DParams {
    std::array<double, 2> goal1{1.0, 0.0};
    std::array<double, 2> goal2{0.0, 1.0};
    double arena_scale = 1.5;
    double max_speed = 0.1;
};

using EnvKind = std::variant<AllocateParams, Goal2DParams>;

struct EnvState {
    Vec observation;
    std::size_t step_index = 0;
    bool done = false;
    /// Per-objective reward accumulated so far.
    Vec cumulative;
    /// Goal2D only.
    std::array<double, 2> position{0.0, 0.0};
};

struct StepResult {
    EnvState state;
    Vec reward;
    bool done = false;
};

class EnvError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Immutable environment description; all state is passed explicitly, so one
/// instance may serve concurrent rollouts as long as each owns its EnvState.
class Environment {
public:
    Environment(EnvKind kind, std::size_t horizon);

    /// `allocate2`, `allocate3`, `goal2d` with default parameters.
    static Environment from_id(std::string_view id, std::size_t horizon);

    const EnvKind& kind() const noexcept { return kind_; }
    std::string id() const;
    /// Parameters as a JSON object string (coefficients / goals / scale / speed).
    std::string params_json() const;
    /// Inverse of params_json; keys missing from `json` keep their current value.
    Environment with_params_json(std::string_view json) const;

    std::size_t n_objectives() const;
    std::size_t state_dim() const;
    std::size_t action_dim() const;
    std::size_t horizon() const noexcept { return horizon_; }
    MOMDPSpec spec() const;
    const Vec& action_low() const noexcept { return low_; }
    const Vec& action_high() const noexcept { return high_; }

    EnvState reset(std::uint64_t seed) const;
    /// Out-of-box actions are clamped componentwise. Throws EnvError on a done state.
    StepResult step(const EnvState& state, std::span<const double> action) const;

    /// Closed-form maximizer of the preference-weighted reward.
    Vec expert_action(const EnvState& state, const Preference& pref) const;

    /// Allocate: exact returns over an allocation grid on the simplex.
    /// Goal2D: expert rollout returns over a preference grid (reset seed 0).
    std::vector<Vec> analytic_front(std::size_t grid_size) const;

    /// Episode return of the scripted expert for `pref` from reset(seed).
    Vec expert_return(const Preference& pref, std::uint64_t seed = 0) const;

private:
    Vec clamp_action(std::span<const double> action) const;
    Vec observe(const EnvState& state) const;

    EnvKind kind_;
    std::size_t horizon_;
    Vec low_;
    Vec high_;
};

} // namespace peda
