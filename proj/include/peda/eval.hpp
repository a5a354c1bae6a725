#pragma once

// Evaluation protocol: preference grid, conditioned rollouts, componentwise
// median over replicates, strict Pareto metrics and tolerant labels.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peda/core.hpp"
#include "peda/datagen.hpp"
#include "peda/envs.hpp"
#include "peda/policies.hpp"

namespace peda {

/// Anything that can be rolled out in an environment under a preference.
class Agent {
public:
    virtual ~Agent() = default;
    virtual void reset(const Preference& pref) = 0;
    virtual Vec act(const EnvState& state) = 0;
    virtual void observe(std::span<const double> action, std::span<const double> reward) = 0;
    virtual std::unique_ptr<Agent> clone() const = 0;
    virtual std::string name() const = 0;
};

/// The scripted expert bound to the evaluation preference.
class ExpertAgent : public Agent {
public:
    explicit ExpertAgent(Environment env) : env_(std::move(env)) {}
    void reset(const Preference& pref) override { pref_ = pref; }
    Vec act(const EnvState& state) override { return env_.expert_action(state, pref_); }
    void observe(std::span<const double>, std::span<const double>) override {}
    std::unique_ptr<Agent> clone() const override { return std::make_unique<ExpertAgent>(*this); }
    std::string name() const override { return "expert"; }

private:
    Environment env_;
    Preference pref_;
};

/// The behavioral ensemble: the member whose estimated preference is
/// closest to the evaluation preference acts.
class BehavioralAgent : public Agent {
public:
    BehavioralAgent(Environment env, BehavioralEnsemble ensemble);
    void reset(const Preference& pref) override;
    Vec act(const EnvState& state) override;
    void observe(std::span<const double>, std::span<const double>) override {}
    std::unique_ptr<Agent> clone() const override { return std::make_unique<BehavioralAgent>(*this); }
    std::string name() const override { return "behavioral"; }

private:
    Environment env_;
    std::shared_ptr<const BehavioralEnsemble> ensemble_;
    std::size_t member_ = 0;
};

/// A trained policy conditioned on beta * predict_target(w), with the raw
/// return-to-go decremented by each achieved reward.
class PolicyAgent : public Agent {
public:
    /// Throws DimensionError if the model was trained for different dimensions.
    PolicyAgent(std::shared_ptr<const PolicyModel> model, const Environment& env, double beta = 1.0);

    void reset(const Preference& pref) override;
    Vec act(const EnvState& state) override;
    void observe(std::span<const double> action, std::span<const double> reward) override;
    std::unique_ptr<Agent> clone() const override { return std::make_unique<PolicyAgent>(*this); }
    std::string name() const override { return model_->kind().name(); }

    /// Replaces the fitted target for subsequent resets (before beta scaling).
    void set_target_override(std::optional<Vec> target) { override_ = std::move(target); }
    const Vec& current_rtg() const noexcept { return rtg_; }

private:
    std::shared_ptr<const PolicyModel> model_;
    double beta_;
    std::optional<Vec> override_;
    Preference pref_;
    Vec rtg_;
    std::vector<Vec> states_, actions_, rtgs_;
};

/// n=2: (k/(count-1), 1-k/(count-1)); n=3: nearest triangular lattice.
std::vector<Preference> preference_grid(std::size_t n_obj, std::size_t count);

/// Runs one episode from env.reset(eval_seed); returns the episode return.
Vec rollout(Agent& agent, const Environment& env, const Preference& pref, std::uint64_t eval_seed);
Vec rollout(const PolicyModel& model, const Environment& env, const Preference& pref, std::uint64_t eval_seed,
            double beta = 1.0);

struct EvalConfig {
    /// 0 selects 501 for two objectives and 325 for three.
    std::size_t grid_count = 0;
    std::size_t reps = 5;
    std::size_t seeds = 3;
    /// Empty means the origin.
    Vec reference;
    double tolerance = 0.05;
    std::uint64_t master_seed = 0;
    std::size_t threads = 1;

    static std::size_t default_grid(std::size_t n_obj);
    void validate() const;
};

struct SeedResult {
    std::vector<Vec> medians;
    std::vector<std::size_t> pareto;
    double hypervolume = 0.0;
    double sparsity = 0.0;
};

struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
};

struct EvalReport {
    std::string env_id;
    std::string agent;
    EvalConfig config;
    std::vector<Preference> grid;
    /// Per grid point: mean over seeds of the per-seed medians.
    std::vector<Vec> medians;
    /// Strict metrics on `medians`.
    std::vector<std::size_t> pareto;
    double hypervolume = 0.0;
    double sparsity = 0.0;
    /// Per point: undominated after scaling up by (1 + tolerance).
    std::vector<std::uint8_t> tolerant;
    std::vector<SeedResult> per_seed;
    MeanStderr hypervolume_seeds;
    MeanStderr sparsity_seeds;

    std::size_t dominated_count() const;
};

/// Strict hypervolume, sparsity and pareto indices of `points`.
void compute_metrics(std::span<const Vec> points, const Vec& reference, std::vector<std::size_t>& pareto,
                     double& hypervolume, double& sparsity);

/// 1 where p + tolerance*|p| is not weakly dominated by any other point.
std::vector<std::uint8_t> tolerant_labels(std::span<const Vec> points, double tolerance);

EvalReport evaluate(const Agent& agent, const Environment& env, const EvalConfig& config);
EvalReport evaluate(const PolicyModel& model, const Environment& env, const EvalConfig& config, double beta = 1.0);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

class ExportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FrontFormat { Csv, Svg };
void export_front(const EvalReport& report, const std::filesystem::path& path, FrontFormat format);

/// Points from a front CSV: the G columns of an exported front, or every
/// numeric column of a plain CSV (one point per line).
std::vector<Vec> read_front_csv(const std::filesystem::path& path);

} // namespace peda
