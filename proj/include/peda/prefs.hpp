#pragma once

// Preference-space sampling (uniform simplex and Dirichlet families),
// rejection sampling onto restricted regions, simplex grids, and the
// Vasicek spacing entropy estimator.

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "peda/core.hpp"
#include "peda/rng.hpp"

namespace peda {

/// Three entropy levels of the preference distribution. Med and Low draw a
/// fresh concentration vector alpha ~ Unif(alpha_low, alpha_high)^n per sample.
struct PrefDist {
    enum class Kind { High, Med, Low };

    Kind kind = Kind::High;
    double alpha_low = 0.0;
    double alpha_high = 0.0;

    static PrefDist high() { return {Kind::High, 0.0, 0.0}; }
    static PrefDist med() { return {Kind::Med, 0.0, 1e6}; }
    static PrefDist low() { return {Kind::Low, 1e6 / 3.0, 2e6 / 3.0}; }

    /// "high" | "med" | "low"
    static PrefDist parse(std::string_view name);
    std::string name() const;
};

/// Componentwise box constraint min_i <= w_i <= max_i. Empty bounds accept all.
struct PrefConstraint {
    Vec min;
    Vec max;

    bool trivial() const noexcept { return min.empty() && max.empty(); }
    bool accepts(const Preference& pref) const;
};

class InfeasibleConstraint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxConsecutiveRejections = 1'000'000;

Preference sample_high(Rng& rng, std::size_t n_obj);
Preference sample_dirichlet(Rng& rng, std::span<const double> alpha);
Preference sample_pref(Rng& rng, const PrefDist& dist, std::size_t n_obj,
                       const PrefConstraint& constraint = {});

/// Checks that a constraint admits samples by drawing `trials` uniform
/// preferences; throws InfeasibleConstraint if none are accepted.
void validate_constraint(const PrefConstraint& constraint, std::size_t n_obj,
                         std::size_t trials = 100'000, std::uint64_t seed = 0);

/// Equally spaced simplex points. n=2: k/(count-1) on the first objective.
/// n=3: triangular lattice whose node count (m+1)(m+2)/2 is closest to `count`.
std::vector<Preference> simplex_grid(std::size_t n_obj, std::size_t count);
/// Lattice side m used by simplex_grid for three objectives.
std::size_t triangular_side_for(std::size_t count);

struct EntropyEstimate {
    double value = 0.0;
    /// Set when a zero spacing makes the estimate undefined (log 0); value is then 0.
    bool degenerate = false;
};

/// Default window floor(sqrt(N)).
std::size_t default_vasicek_window(std::size_t n_samples);

/// Vasicek m-spacing estimate of a scalar sample's differential entropy.
EntropyEstimate vasicek_entropy(std::span<const double> samples, std::size_t window = 0);

/// Sum of per-coordinate Vasicek estimates over the first n-1 simplex
/// coordinates (the last is determined by the others).
EntropyEstimate vasicek_entropy(std::span<const Preference> samples, std::size_t window = 0);

} // namespace peda
