#pragma once

// Offline dataset generation: a behavioral ensemble of scripted experts,
// closest-agent matching on estimated preferences, optional action
// perturbation (amateur data), and the binary dataset format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>

#include "peda/core.hpp"
#include "peda/envs.hpp"
#include "peda/prefs.hpp"
#include "peda/rng.hpp"

namespace peda {

struct EnsembleMember {
    /// Preference the scripted policy is bound to.
    Preference target;
    /// Normalized expected return ratio G_i / sum_j G_j.
    Preference estimated;
};

struct BehavioralEnsemble {
    std::vector<EnsembleMember> members;

    std::size_t size() const noexcept { return members.size(); }
};

/// Default ensemble size: 101 members for two objectives, 66 for three.
std::size_t default_ensemble_size(std::size_t n_obj);

/// B scripted experts on an equally spaced simplex grid; each member's
/// estimated preference comes from the mean return of `probe_reps` rollouts.
BehavioralEnsemble build_ensemble(const Environment& env, std::size_t size, std::size_t probe_reps = 1,
                                  std::uint64_t seed = 0);

/// argmin_b |pref - estimated_b|_2; ties resolve to the lowest index.
std::size_t closest_agent(const BehavioralEnsemble& ensemble, const Preference& pref);

struct AmateurConfig {
    enum class Mode {
        /// prob 1-p: expert action; prob p: expert * u, u ~ Unif(scale range).
        Scale,
        /// prob 1-p: uniform over the action box; prob p: scaled as above.
        MixedUniform,
    };
    double perturb_prob = 0.65;
    double scale_low = 0.35;
    double scale_high = 1.65;
    Mode mode = Mode::Scale;

    void validate() const;
};

/// Result is clamped to [low, high].
Vec perturb_action(Rng& rng, std::span<const double> expert_action, const AmateurConfig& config,
                   std::span<const double> low, std::span<const double> high);

enum class Quality { Expert, Amateur };
std::string to_string(Quality q);
Quality parse_quality(std::string_view name);

struct GenConfig {
    Environment env = Environment::from_id("allocate2", 50);
    Quality quality = Quality::Expert;
    AmateurConfig amateur;
    PrefDist pref_dist = PrefDist::high();
    PrefConstraint constraint;
    std::size_t n_traj = 1000;
    std::uint64_t seed = 0;
    std::size_t ensemble_size = 0;  // 0: default_ensemble_size
    std::size_t probe_reps = 3;
    unsigned threads = 1;

    void validate() const;
};

/// Rounds a preference onto the 2^-20 grid (exact in float and double, sums
/// to exactly 1) so that the stored f32 annotation round-trips losslessly.
Preference quantize_preference(const Preference& pref);

/// Runs the collection loop. Trajectory k uses streams derived from
/// (seed, k), so the result does not depend on the thread count.
Dataset collect(const GenConfig& config);
/// Same, reusing a prebuilt ensemble.
Dataset collect(const GenConfig& config, const BehavioralEnsemble& ensemble);

// ---------------------------------------------------------------- file format

inline constexpr char kDatasetMagic[4] = {'D', '4', 'M', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

class DatasetError : public std::runtime_error {
public:
    enum class Code { Io, BadMagic, BadVersion, Truncated, DimensionMismatch, BadSidecar };

    DatasetError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

/// Binary file name inside a dataset directory.
inline constexpr const char* kDatasetFile = "dataset.d4m";

/// Writes `path` (binary) and `<stem>.meta.json` beside it. A directory path
/// receives dataset.d4m + dataset.meta.json.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
/// Reads a binary file (or a directory holding dataset.d4m) and its sidecar
/// when present. Normalization stats are recomputed from the trajectories.
Dataset read_dataset(const std::filesystem::path& path);

std::filesystem::path dataset_binary_path(const std::filesystem::path& path);
std::filesystem::path dataset_sidecar_path(const std::filesystem::path& path);

} // namespace peda
