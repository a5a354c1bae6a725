#pragma once

// Multi-objective MDP value types shared by every module: preferences,
// trajectories, returns-to-go and return normalization.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace peda {

using Vec = std::vector<double>;

/// Raised on mismatched vector lengths anywhere in the library.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A point on the probability simplex: non-negative objective weights
/// summing to one (within 1e-9).
class Preference {
public:
    static constexpr double kSumTolerance = 1e-9;

    Preference() = default;
    /// Throws std::invalid_argument unless `weights` lies on the simplex.
    explicit Preference(Vec weights);

    /// Uniform weights 1/n.
    static Preference uniform(std::size_t n);

    const Vec& weights() const noexcept { return w_; }
    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }

    friend bool operator==(const Preference&, const Preference&) = default;

private:
    Vec w_;
};

/// One environment transition as stored in a dataset.
struct Step {
    Vec state;
    Vec action;
    Vec reward;

    friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
    Preference preference;
    std::vector<Step> steps;

    /// Undiscounted episode return (the first returns-to-go entry).
    Vec total_return() const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Per-objective min/max of episode returns. Objectives with max == min
/// normalize to the constant 0.
struct NormalizationStats {
    Vec min;
    Vec max;

    std::size_t size() const noexcept { return min.size(); }
    /// Same stats divided by `factor` (per-step scale for average returns).
    NormalizationStats scaled(double factor) const;

    friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

struct MOMDPSpec {
    std::size_t n_objectives = 2;
    std::size_t state_dim = 1;
    std::size_t action_dim = 1;
    std::size_t horizon = 1;
    double discount = 1.0;

    void validate() const;
};

/// Generation provenance carried by a dataset and written to its sidecar.
struct DatasetMeta {
    std::string env_id;
    std::string env_params_json = "{}";
    std::string quality;
    std::string pref_dist;
    std::uint64_t seed = 0;
    std::size_t ensemble_size = 0;
    std::size_t horizon = 0;
    std::string created;
};

struct Dataset {
    std::size_t n_obj = 0;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::vector<Trajectory> trajectories;
    NormalizationStats stats;
    DatasetMeta meta;

    bool empty() const noexcept { return trajectories.empty(); }
    /// Throws DimensionError if any step disagrees with the header dimensions.
    void validate() const;
};

double scalarize(const Preference& pref, std::span<const double> reward);

/// Suffix sums of the reward vectors; entry 0 is the episode return.
std::vector<Vec> compute_rtg(const Trajectory& traj);

Vec weighted_rtg(std::span<const double> rtg, const Preference& pref);

/// (v - min) / (max - min) per objective, unclamped.
Vec normalize_return(std::span<const double> value, const NormalizationStats& stats);
Vec denormalize_return(std::span<const double> value, const NormalizationStats& stats);

/// Min/max over the episode returns of every trajectory.
NormalizationStats dataset_stats(const Dataset& dataset);

} // namespace peda
